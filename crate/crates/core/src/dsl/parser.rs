//! Recursive-descent parser producing an unresolved syntax tree.

use crate::error::{Error, Result};
use crate::expr::json::parse_rational;
use crate::expr::{Index, Rational, Sym, Variance};
use crate::registry::{FieldKind, Symmetry};

use super::lexer::{lex, Tok, Token};

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(Rational),
    /// A bare or indexed symbol; resolution happens at evaluation.
    Sym { name: Sym, idx: Vec<Index>, bracketed: bool, pos: Pos },
    /// `d[i] inner`; several indices apply outermost first.
    Deriv { idx: Vec<Index>, inner: Box<Node>, pos: Pos },
    Sum(Vec<Node>),
    Prod(Vec<Node>),
    Neg(Box<Node>),
}

impl Node {
    pub fn zero() -> Node {
        Node::Num(Rational::from_integer(0.into()))
    }

    /// Visit every symbol reference together with the number of derivatives
    /// stacked directly on it.
    pub fn visit_syms<'a>(&'a self, depth: usize, f: &mut dyn FnMut(&'a Sym, &'a [Index], usize, Pos)) {
        match self {
            Node::Num(_) => {}
            Node::Sym { name, idx, pos, .. } => f(name, idx, depth, *pos),
            Node::Deriv { idx, inner, .. } => inner.visit_syms(depth + idx.len(), f),
            Node::Sum(v) | Node::Prod(v) => v.iter().for_each(|n| n.visit_syms(depth, f)),
            Node::Neg(n) => n.visit_syms(depth, f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub name: Sym,
    pub rank: usize,
    pub symmetry: Symmetry,
    pub kind: FieldKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Def {
    pub name: Sym,
    pub params: Vec<Index>,
    pub body: Node,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Field(FieldDecl),
    Param(Vec<(Sym, Pos)>),
    Def(Def),
    Lagrangian(Node, Pos),
    /// `delta F[slots] = body` where body is linear in `dx`.
    Delta(Def),
    /// `gauge F[slots] = body`.
    Gauge(Def),
}

const KEYWORDS: &[&str] = &["field", "param", "def", "lagrangian", "gauge"];

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

fn perr<T>(t: &Token, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line: t.line, col: t.col, msg: msg.into() })
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        let t = self.peek();
        Pos { line: t.line, col: t.col }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        if self.peek().tok == want {
            Ok(self.bump())
        } else {
            perr(self.peek(), format!("expected {what}, found {}", describe(&self.peek().tok)))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos)> {
        let pos = self.pos();
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok((s, pos))
            }
            other => perr(self.peek(), format!("expected {what}, found {}", describe(other))),
        }
    }

    fn int(&mut self) -> Result<usize> {
        match &self.peek().tok {
            Tok::Int(s) => {
                let t = self.peek().clone();
                let v = s.parse().or_else(|_| perr(&t, "integer out of range"))?;
                self.bump();
                Ok(v)
            }
            other => perr(self.peek(), format!("expected integer, found {}", describe(other))),
        }
    }

    /// True when the current token begins a new statement.
    fn at_statement(&self) -> bool {
        match &self.peek().tok {
            Tok::Eof => true,
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => true,
            Tok::Ident(s) if s == "delta" => !matches!(self.peek_at(1), Tok::LBracket),
            _ => false,
        }
    }

    fn program(&mut self) -> Result<Vec<Stmt>> {
        let mut out = Vec::new();
        while self.peek().tok != Tok::Eof {
            out.push(self.statement()?);
        }
        Ok(out)
    }

    fn statement(&mut self) -> Result<Stmt> {
        let pos = self.pos();
        let (kw, _) = self.ident("statement keyword")?;
        match kw.as_str() {
            "field" => self.field(pos),
            "param" => {
                let mut names = vec![self.name_pos("parameter name")?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    names.push(self.name_pos("parameter name")?);
                }
                Ok(Stmt::Param(names))
            }
            "def" => Ok(Stmt::Def(self.definition(pos)?)),
            "delta" => Ok(Stmt::Delta(self.definition(pos)?)),
            "gauge" => Ok(Stmt::Gauge(self.definition(pos)?)),
            "lagrangian" => {
                self.expect(Tok::Eq, "`=`")?;
                Ok(Stmt::Lagrangian(self.expr()?, pos))
            }
            _ => Err(Error::Parse { line: pos.line, col: pos.col, msg: format!("unknown statement `{kw}`") }),
        }
    }

    fn name_pos(&mut self, what: &str) -> Result<(Sym, Pos)> {
        let (n, p) = self.ident(what)?;
        Ok((Sym::from(n), p))
    }

    fn field(&mut self, pos: Pos) -> Result<Stmt> {
        let (name, _) = self.ident("field name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let (mut rank, mut symmetry, mut kind) = (None, Symmetry::None, FieldKind::Dynamical);
        loop {
            let key_tok = self.peek().clone();
            let (key, _) = self.ident("field attribute")?;
            self.expect(Tok::Colon, "`:`")?;
            match key.as_str() {
                "rank" => rank = Some(self.int()?),
                "symmetry" => {
                    let t = self.peek().clone();
                    let (v, _) = self.ident("symmetry")?;
                    symmetry = match v.as_str() {
                        "none" => Symmetry::None,
                        "symmetric" => Symmetry::Symmetric,
                        "antisymmetric" => Symmetry::Antisymmetric,
                        _ => return perr(&t, format!("unknown symmetry `{v}`")),
                    };
                }
                "kind" => {
                    let t = self.peek().clone();
                    let (mut v, _) = self.ident("kind")?;
                    // `gauge-parameter` lexes as three tokens.
                    if self.peek().tok == Tok::Minus {
                        self.bump();
                        let (rest, _) = self.ident("kind")?;
                        v = format!("{v}_{rest}");
                    }
                    kind = match v.as_str() {
                        "dynamical" => FieldKind::Dynamical,
                        "metric" => FieldKind::Metric,
                        "gauge_parameter" => FieldKind::GaugeParameter,
                        "constant" | "coordinate_constant" => FieldKind::Constant,
                        _ => return perr(&t, format!("unknown field kind `{v}`")),
                    };
                }
                _ => return perr(&key_tok, format!("unknown field attribute `{key}`")),
            }
            if self.peek().tok == Tok::Comma {
                self.bump();
                continue;
            }
            self.expect(Tok::RBrace, "`}`")?;
            break;
        }
        let Some(rank) = rank else {
            return Err(Error::Parse { line: pos.line, col: pos.col, msg: format!("field `{name}` lacks a rank") });
        };
        Ok(Stmt::Field(FieldDecl { name: name.into(), rank, symmetry, kind, pos }))
    }

    fn definition(&mut self, pos: Pos) -> Result<Def> {
        let (name, _) = self.ident("name")?;
        let params = if self.peek().tok == Tok::LBracket { self.index_list()? } else { Vec::new() };
        self.expect(Tok::Eq, "`=`")?;
        let body = self.expr()?;
        Ok(Def { name: name.into(), params, body, pos })
    }

    fn index_list(&mut self) -> Result<Vec<Index>> {
        self.expect(Tok::LBracket, "`[`")?;
        let mut out = vec![self.index()?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            out.push(self.index()?);
        }
        self.expect(Tok::RBracket, "`]`")?;
        Ok(out)
    }

    fn index(&mut self) -> Result<Index> {
        let var = if self.peek().tok == Tok::Caret {
            self.bump();
            Variance::Up
        } else {
            Variance::Lo
        };
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(Index::new(s, var))
            }
            other => perr(self.peek(), format!("malformed index: expected name, found {}", describe(other))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut parts = vec![self.signed_term()?];
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    parts.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    parts.push(Node::Neg(Box::new(self.term()?)));
                }
                _ => break,
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Node::Sum(parts) })
    }

    fn signed_term(&mut self) -> Result<Node> {
        match self.peek().tok {
            Tok::Minus => {
                self.bump();
                Ok(Node::Neg(Box::new(self.term()?)))
            }
            Tok::Plus => {
                self.bump();
                self.term()
            }
            _ => self.term(),
        }
    }

    fn starts_factor(&self) -> bool {
        match &self.peek().tok {
            Tok::Int(_) | Tok::LParen => true,
            Tok::Ident(_) => !self.at_statement(),
            _ => false,
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut parts = vec![self.factor()?];
        loop {
            if self.peek().tok == Tok::Star {
                self.bump();
                parts.push(self.factor()?);
            } else if self.starts_factor() {
                parts.push(self.factor()?);
            } else {
                break;
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Node::Prod(parts) })
    }

    fn factor(&mut self) -> Result<Node> {
        let pos = self.pos();
        match self.peek().tok.clone() {
            Tok::Minus => {
                self.bump();
                Ok(Node::Neg(Box::new(self.factor()?)))
            }
            Tok::Int(n) => {
                self.bump();
                let mut text = n;
                if self.peek().tok == Tok::Slash {
                    self.bump();
                    match &self.peek().tok {
                        Tok::Int(d) => {
                            text = format!("{text}/{d}");
                            self.bump();
                        }
                        other => return perr(self.peek(), format!("expected denominator, found {}", describe(other))),
                    }
                }
                let q = parse_rational(&text)
                    .map_err(|_| Error::Parse { line: pos.line, col: pos.col, msg: format!("bad rational `{text}`") })?;
                Ok(Node::Num(q))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if !self.at_statement() => {
                self.bump();
                if name == "d" {
                    if self.peek().tok != Tok::LBracket {
                        return perr(self.peek(), "derivative `d` needs an index list");
                    }
                    let idx = self.index_list()?;
                    if !self.starts_factor() && !matches!(self.peek().tok, Tok::Minus) {
                        return perr(self.peek(), "derivative must be followed by a factor");
                    }
                    let inner = self.factor()?;
                    return Ok(Node::Deriv { idx, inner: Box::new(inner), pos });
                }
                if self.peek().tok == Tok::LBracket {
                    let idx = self.index_list()?;
                    Ok(Node::Sym { name: name.into(), idx, bracketed: true, pos })
                } else {
                    Ok(Node::Sym { name: name.into(), idx: Vec::new(), bracketed: false, pos })
                }
            }
            other => perr(self.peek(), format!("expected a factor, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

pub fn parse_statements(src: &str) -> Result<Vec<Stmt>> {
    let toks = lex(src)?;
    Parser { toks, at: 0 }.program()
}

/// Parse a single expression; trailing input is an error.
pub fn parse_expression(src: &str) -> Result<Node> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return perr(p.peek(), format!("unexpected {} after expression", describe(&p.peek().tok)));
    }
    Ok(e)
}
