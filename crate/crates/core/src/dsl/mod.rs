//! Declaration language for fields, parameters, index macros and
//! Lagrangians.
//!
//! ```text
//! field h {rank:2, symmetry:symmetric}
//! param A, B, C
//! def Rs = d[a] d[b] h[^a,^b] - d[a] d[^a] h[b,^b]
//! lagrangian = C * Rs * Rs
//! ```
//!
//! `d[i]` binds to the factor that follows it. Products may be written with
//! `*` or by juxtaposition. `#` starts a comment. Variation rules use
//! `delta F[slots] = ... dx[^r]` and gauge transformations use
//! `gauge F[slots] = ...`.

mod lexer;
mod parser;
mod render;

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{total_derivative_unchecked, Rule};
use crate::canon::canonicalize;
use crate::error::{Error, Result};
use crate::expr::{Factor, Fresh, Index, Sym, TensorExpr, DIM_PARAM};
use crate::registry::{FieldKind, Registry, SlotSymmetry, Symmetry};

pub use parser::{parse_expression, Def, FieldDecl, Node, Pos};
pub use render::{render, render_groups, Format};

/// Head standing for the translation parameter inside `delta` bodies.
pub const DX: &str = "dx";

/// Names that user declarations may not take.
const RESERVED: &[&str] = &["eta", "delta", "g", "ginv", "sqrtg", "Gamma", "d", DX, DIM_PARAM];

pub type FieldSpec = FieldDecl;

/// A parsed and resolved declaration file.
#[derive(Clone, Debug, Default)]
pub struct Program {
    pub fields: Vec<FieldDecl>,
    pub params: Vec<Sym>,
    pub defs: Vec<Def>,
    pub lagrangian: Option<Node>,
    pub deltas: Vec<Def>,
    pub gauges: Vec<Def>,
}

/// Parse a complete program. Exactly one `lagrangian` statement is required.
pub fn parse(text: &str) -> Result<Program> {
    let p = Program::default().extend(text)?;
    if p.lagrangian.is_none() {
        return Err(Error::Parse { line: 1, col: 1, msg: "missing `lagrangian` statement".into() });
    }
    Ok(p)
}

/// All macros substituted, expanded and canonicalized.
pub fn expand_defs(p: &Program) -> Result<TensorExpr> {
    canonicalize(&p.lagrangian_expr()?, &p.registry())
}

pub(crate) enum Resolved<'a> {
    Field(&'a FieldDecl),
    Param,
    Def(&'a Def),
    Builtin(usize),
}

impl Program {
    /// Parse further statements in the context of this program. Used for
    /// rule files that refer to fields and macros declared elsewhere.
    pub fn extend(&self, text: &str) -> Result<Program> {
        let mut p = self.clone();
        let stmts = parser::parse_statements(text)?;
        for s in stmts {
            match s {
                parser::Stmt::Field(f) => {
                    p.check_new_name(&f.name, f.pos)?;
                    if f.rank < 2 && f.symmetry != Symmetry::None {
                        return Err(Error::Parse {
                            line: f.pos.line,
                            col: f.pos.col,
                            msg: format!("symmetry on `{}` needs rank at least 2", f.name),
                        });
                    }
                    p.fields.push(f);
                }
                parser::Stmt::Param(names) => {
                    for (n, pos) in names {
                        p.check_new_name(&n, pos)?;
                        p.params.push(n);
                    }
                }
                parser::Stmt::Def(d) => {
                    p.check_new_name(&d.name, d.pos)?;
                    p.defs.push(d);
                }
                parser::Stmt::Lagrangian(n, pos) => {
                    if p.lagrangian.is_some() {
                        return Err(Error::Parse { line: pos.line, col: pos.col, msg: "second `lagrangian` statement".into() });
                    }
                    p.lagrangian = Some(n);
                }
                parser::Stmt::Delta(d) => p.deltas.push(d),
                parser::Stmt::Gauge(d) => p.gauges.push(d),
            }
        }
        p.check()?;
        Ok(p)
    }

    fn check_new_name(&self, n: &Sym, pos: Pos) -> Result<()> {
        let taken = RESERVED.contains(&n.as_str())
            || self.fields.iter().any(|f| &f.name == n)
            || self.params.contains(n)
            || self.defs.iter().any(|d| &d.name == n);
        if taken {
            return Err(Error::Duplicate(format!("{n} (line {}, column {})", pos.line, pos.col)));
        }
        Ok(())
    }

    pub(crate) fn resolve(&self, name: &str) -> Option<Resolved<'_>> {
        if let Some(f) = self.fields.iter().find(|f| f.name.as_str() == name) {
            return Some(Resolved::Field(f));
        }
        if name == DIM_PARAM || self.params.iter().any(|p| p.as_str() == name) {
            return Some(Resolved::Param);
        }
        if let Some(d) = self.defs.iter().find(|d| d.name.as_str() == name) {
            return Some(Resolved::Def(d));
        }
        Registry::builtin().get(name).map(|h| Resolved::Builtin(h.rank))
    }

    /// Symbol resolution, arity and macro recursion checks.
    fn check(&self) -> Result<()> {
        let mut bodies: Vec<(&Node, bool)> = self.defs.iter().map(|d| (&d.body, false)).collect();
        if let Some(l) = &self.lagrangian {
            bodies.push((l, false));
        }
        for r in &self.deltas {
            self.check_rule_target(r)?;
            bodies.push((&r.body, true));
        }
        for r in &self.gauges {
            self.check_rule_target(r)?;
            bodies.push((&r.body, false));
        }
        for (b, allow_dx) in bodies {
            self.check_node(b, allow_dx)?;
        }
        self.check_recursion()
    }

    fn check_rule_target(&self, r: &Def) -> Result<()> {
        match self.resolve(r.name.as_str()) {
            Some(Resolved::Field(f)) if f.rank == r.params.len() => Ok(()),
            Some(Resolved::Field(f)) => Err(Error::Arity { name: f.name.to_string(), expected: f.rank, found: r.params.len() }),
            _ => Err(Error::UnknownSymbol(format!("{} at line {}, column {}", r.name, r.pos.line, r.pos.col))),
        }
    }

    fn check_node(&self, n: &Node, allow_dx: bool) -> Result<()> {
        let mut err = None;
        n.visit_syms(0, &mut |name, idx, _, pos| {
            if err.is_some() {
                return;
            }
            let expected = if allow_dx && name.as_str() == DX {
                Some(1)
            } else {
                match self.resolve(name.as_str()) {
                    None => {
                        err = Some(Error::UnknownSymbol(format!("{name} at line {}, column {}", pos.line, pos.col)));
                        return;
                    }
                    Some(Resolved::Field(f)) => Some(f.rank),
                    Some(Resolved::Param) => Some(0),
                    Some(Resolved::Def(d)) => Some(d.params.len()),
                    Some(Resolved::Builtin(r)) => Some(r),
                }
            };
            if let Some(k) = expected {
                if k != idx.len() {
                    err = Some(Error::Arity { name: name.to_string(), expected: k, found: idx.len() });
                }
            }
        });
        err.map_or(Ok(()), Err)
    }

    fn check_recursion(&self) -> Result<()> {
        let deps: BTreeMap<&str, BTreeSet<&str>> = self
            .defs
            .iter()
            .map(|d| {
                let mut s = BTreeSet::new();
                d.body.visit_syms(0, &mut |n, _, _, _| {
                    if self.defs.iter().any(|e| e.name == *n) {
                        s.insert(n.as_str());
                    }
                });
                (d.name.as_str(), s)
            })
            .collect();
        // 0 unvisited, 1 on stack, 2 done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn dfs<'a>(n: &'a str, deps: &BTreeMap<&'a str, BTreeSet<&'a str>>, st: &mut BTreeMap<&'a str, u8>) -> Result<()> {
            match st.get(n) {
                Some(1) => return Err(Error::RecursiveMacro(n.to_string())),
                Some(2) => return Ok(()),
                _ => {}
            }
            st.insert(n, 1);
            for m in &deps[n] {
                dfs(m, deps, st)?;
            }
            st.insert(n, 2);
            Ok(())
        }
        for d in &self.defs {
            dfs(d.name.as_str(), &deps, &mut state)?;
        }
        Ok(())
    }

    /// Built-in heads plus the declared fields.
    pub fn registry(&self) -> Registry {
        let mut r = Registry::builtin();
        for f in &self.fields {
            r.insert(f.name.as_str(), f.rank, SlotSymmetry::whole(f.symmetry), f.kind);
        }
        r
    }

    /// Registry in which macros are opaque heads of their arity.
    pub fn opaque_registry(&self) -> Registry {
        let mut r = self.registry();
        for d in &self.defs {
            r.insert(d.name.as_str(), d.params.len(), SlotSymmetry::NONE, FieldKind::Constant);
        }
        r
    }

    pub fn dynamical_fields(&self) -> Vec<&FieldDecl> {
        self.fields.iter().filter(|f| f.kind == FieldKind::Dynamical).collect()
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name.as_str() == name)
    }

    /// The Lagrangian with macros expanded, not canonicalized. Derivative
    /// order is as written.
    pub fn lagrangian_expr(&self) -> Result<TensorExpr> {
        match &self.lagrangian {
            None => Ok(TensorExpr::zero()),
            Some(n) => Evaluator::new(self, false).eval(n),
        }
    }

    /// The Lagrangian with macro names kept as opaque heads.
    pub fn lagrangian_opaque(&self) -> Result<TensorExpr> {
        match &self.lagrangian {
            None => Ok(TensorExpr::zero()),
            Some(n) => Evaluator::new(self, true).eval(n),
        }
    }

    /// Parse and evaluate a standalone expression against this program's
    /// declarations.
    pub fn parse_expr(&self, text: &str) -> Result<TensorExpr> {
        let n = parse_expression(text)?;
        self.check_node(&n, false)?;
        Evaluator::new(self, false).eval(&n)
    }

    /// As [`Program::parse_expr`] with macros left opaque.
    pub fn parse_expr_opaque(&self, text: &str) -> Result<TensorExpr> {
        let n = parse_expression(text)?;
        self.check_node(&n, false)?;
        Evaluator::new(self, true).eval(&n)
    }

    /// Evaluate a syntax tree against this program.
    pub fn eval(&self, n: &Node) -> Result<TensorExpr> {
        Evaluator::new(self, false).eval(n)
    }

    /// Macro `name` expanded at its declared parameter indices.
    pub fn macro_expr(&self, name: &str) -> Result<TensorExpr> {
        let mut ev = Evaluator::new(self, false);
        let d = self
            .defs
            .iter()
            .find(|d| d.name.as_str() == name)
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
        Ok(ev.macro_rule(d)?.rule)
    }

    /// Declared `gauge` transformations as substitution rules.
    pub fn gauge_rules(&self) -> Result<Vec<Rule>> {
        self.gauges
            .iter()
            .map(|g| {
                let body = Evaluator::new(self, false).eval(&g.body)?;
                Rule::new(g.name.clone(), g.params.clone(), body)
            })
            .collect()
    }

    /// Declared `delta` rules: field, slots and body containing one `dx`
    /// factor per term.
    pub fn delta_rules(&self) -> Result<Vec<(Sym, Vec<Index>, TensorExpr)>> {
        self.deltas
            .iter()
            .map(|d| {
                let mut ev = Evaluator::new(self, false);
                ev.allow_dx = true;
                Ok((d.name.clone(), d.params.clone(), ev.eval(&d.body)?))
            })
            .collect()
    }
}

/// Turns syntax trees into flat sums.
struct Evaluator<'p> {
    prog: &'p Program,
    fresh: Fresh,
    cache: BTreeMap<Sym, Rule>,
    opaque: bool,
    allow_dx: bool,
}

impl<'p> Evaluator<'p> {
    fn new(prog: &'p Program, opaque: bool) -> Self {
        Evaluator { prog, fresh: Fresh::new(), cache: BTreeMap::new(), opaque, allow_dx: false }
    }

    fn macro_rule(&mut self, d: &Def) -> Result<Rule> {
        if let Some(r) = self.cache.get(&d.name) {
            return Ok(r.clone());
        }
        let body = self.eval(&d.body)?;
        let free = body.free_indices();
        let mut want = d.params.clone();
        want.sort();
        if !body.is_zero() && free != want {
            return Err(Error::Validation {
                index: d.name.to_string(),
                reason: format!(
                    "macro body has free indices {:?}, parameters are {:?}",
                    free.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
                    want.iter().map(|i| i.to_string()).collect::<Vec<_>>()
                ),
            });
        }
        let r = Rule::new(d.name.clone(), d.params.clone(), body)?;
        self.cache.insert(d.name.clone(), r.clone());
        Ok(r)
    }

    fn eval(&mut self, n: &Node) -> Result<TensorExpr> {
        let e = match n {
            Node::Num(q) => TensorExpr::constant(q.clone()),
            Node::Sym { name, idx, pos, .. } => {
                if self.allow_dx && name.as_str() == DX {
                    return Ok(TensorExpr::from_factor(Factor::new(name.clone(), idx.clone())));
                }
                match self.prog.resolve(name.as_str()) {
                    None => {
                        return Err(Error::UnknownSymbol(format!("{name} at line {}, column {}", pos.line, pos.col)))
                    }
                    Some(Resolved::Param) => TensorExpr::param(name.clone()),
                    Some(Resolved::Field(_)) | Some(Resolved::Builtin(_)) => {
                        TensorExpr::from_factor(Factor::new(name.clone(), idx.clone()))
                    }
                    Some(Resolved::Def(d)) => {
                        if self.opaque {
                            TensorExpr::from_factor(Factor::new(name.clone(), idx.clone()))
                        } else {
                            let d = d.clone();
                            let rule = self.macro_rule(&d)?;
                            rule.instantiate(&Factor::new(name.clone(), idx.clone()), &mut self.fresh)?
                        }
                    }
                }
            }
            Node::Deriv { idx, inner, .. } => {
                let mut e = self.eval(inner)?;
                let names: BTreeSet<Sym> = idx.iter().map(|i| i.name.clone()).collect();
                self.fresh.reserve(names.iter());
                for t in &mut e.terms {
                    t.freshen_dummies(&names, &mut self.fresh);
                }
                for i in idx.iter().rev() {
                    e = total_derivative_unchecked(&e, i);
                }
                e
            }
            Node::Sum(parts) => {
                let mut acc = TensorExpr::zero();
                for p in parts {
                    acc.extend(self.eval(p)?);
                }
                acc
            }
            Node::Prod(parts) => {
                let mut acc = TensorExpr::one();
                for p in parts {
                    let x = self.eval(p)?;
                    acc = acc.mul_with(&x, &mut self.fresh);
                }
                acc
            }
            Node::Neg(inner) => -self.eval(inner)?,
        };
        e.validate()?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::equal;
    use crate::expr::rat;

    const GB: &str = "
        field h {rank:2, symmetry:symmetric}
        param A, B, C
        def R4[^mu,^nu,^al,^be] = 1/2 * (d[^mu] d[^be] h[^nu,^al] + d[^nu] d[^al] h[^mu,^be]
                                       - d[^mu] d[^al] h[^nu,^be] - d[^nu] d[^be] h[^mu,^al])
        def Ric[^nu,^be] = eta[mu,al] R4[^mu,^nu,^al,^be]
        def Rs = eta[nu,be] Ric[^nu,^be]
        lagrangian = A R4[mu,nu,al,be] R4[^mu,^nu,^al,^be] + B Ric[nu,be] Ric[^nu,^be] + C Rs Rs
    ";

    #[test]
    fn minimal_program() {
        let p = parse("field phi {rank:0} lagrangian = 1/2 * d[mu] phi * d[^mu] phi").unwrap();
        assert_eq!(p.fields.len(), 1);
        assert_eq!(expand_defs(&p).unwrap().len(), 1);
    }

    #[test]
    fn rank_mismatch_is_arity_error() {
        let e = parse("field h {rank:2, symmetry:symmetric} lagrangian = h[mu] h[^mu]");
        assert!(matches!(e, Err(Error::Arity { expected: 2, found: 1, .. })), "{e:?}");
    }

    #[test]
    fn unknown_and_duplicate_symbols() {
        assert!(matches!(parse("lagrangian = q"), Err(Error::UnknownSymbol(_))));
        assert!(matches!(parse("field q {rank:0} param q lagrangian = q"), Err(Error::Duplicate(_))));
        assert!(matches!(parse("field eta {rank:2} lagrangian = 0"), Err(Error::Duplicate(_))));
        assert!(matches!(parse("field q {rank:0}"), Err(Error::Parse { .. })));
    }

    #[test]
    fn recursive_macros_rejected() {
        let e = parse("field q {rank:0} def X = q Y def Y = X lagrangian = X");
        assert!(matches!(e, Err(Error::RecursiveMacro(_))), "{e:?}");
        let e = parse("field q {rank:0} def X = q X lagrangian = X");
        assert!(matches!(e, Err(Error::RecursiveMacro(_))), "{e:?}");
    }

    #[test]
    fn zero_lagrangian_is_empty() {
        let p = parse("field q {rank:0} lagrangian = 0").unwrap();
        assert!(expand_defs(&p).unwrap().is_zero());
    }

    #[test]
    fn gauss_bonnet_program_shape() {
        let p = parse(GB).unwrap();
        let h = p.field("h").unwrap();
        assert_eq!((h.rank, h.symmetry), (2, Symmetry::Symmetric));
        assert_eq!(p.params.len(), 3);
        let l = expand_defs(&p).unwrap();
        for (par, n) in [("A", 3), ("B", 7), ("C", 3)] {
            assert_eq!(l.coefficient_of(&[Sym::from(par)]).len(), n, "{par}");
        }
        assert_eq!(l.len(), 13);
    }

    #[test]
    fn macro_variance_bridge() {
        let p = parse(GB).unwrap();
        // Lower-index use of an upper-index macro equals explicit lowering.
        let low = p.parse_expr("R4[m,n,a,b]").unwrap();
        let explicit = p
            .parse_expr("eta[m,w] eta[n,x] eta[a,y] eta[b,z] R4[^w,^x,^y,^z]")
            .unwrap();
        assert!(equal(&low, &explicit, &p.registry()).unwrap());
    }

    #[test]
    fn parameter_substitution_commutes_with_expansion() {
        let p = parse(GB).unwrap();
        let vals: BTreeMap<Sym, _> =
            [("A", rat(1, 4)), ("B", rat(-1, 1)), ("C", rat(1, 4))].into_iter().map(|(k, v)| (Sym::from(k), v)).collect();
        let after = expand_defs(&p).unwrap().substitute_params(&vals);
        let src = GB.replace("A R4", "1/4 R4").replace("B Ric", "-1 * Ric").replace("C Rs", "1/4 Rs");
        let src = src.replace("param A, B, C", "");
        let before = expand_defs(&parse(&src).unwrap()).unwrap();
        assert!(equal(&after, &before, &p.registry()).unwrap());
    }
}
