//! Promotion of a flat Lagrangian to curved space.
//!
//! Subexpressions are held with every free index lower; the source variance
//! of each free index is tracked beside the expression. Contracting a source
//! upper index inserts a `ginv` factor, so a covariant derivative is always
//! the lower-index rule
//! `nabla_i W_{f..} = d_i W_{f..} - sum_f Gamma^l_{i f} W_{..l..}`.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::total_derivative_unchecked;
use crate::canon::canonicalize;
use crate::dsl::{parse_expression, Def, Node, Program, Resolved};
use crate::error::{Error, Result};
use crate::expr::{Factor, Fresh, Index, Sym, Term, TensorExpr, Variance};
use crate::registry::{DELTA, ETA, G, GAMMA, GINV, SQRTG};

/// A curved-space Lagrangian. Every term carries exactly one `sqrtg`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvedLagrangian {
    pub expr: TensorExpr,
}

impl CurvedLagrangian {
    /// Metric-derivative grade of every term, in term order.
    pub fn grades(&self) -> Vec<usize> {
        self.expr.terms.iter().map(super::prune::grade).collect()
    }
}

#[derive(Clone, Debug)]
struct Value {
    /// All free indices lower.
    expr: TensorExpr,
    /// Free names of `expr` with their source variance.
    free: Vec<Index>,
}

pub(crate) fn ginv(a: &Sym, b: &Sym) -> Factor {
    Factor::new(GINV, vec![Index::up(a.clone()), Index::up(b.clone())])
}

pub(crate) fn times_factor(e: &TensorExpr, f: &Factor) -> TensorExpr {
    let mut out = e.clone();
    for t in &mut out.terms {
        t.factors.push(f.clone());
    }
    out
}

fn rename_one(e: &TensorExpr, from: &Sym, to: &Sym) -> TensorExpr {
    let mut map = BTreeMap::new();
    map.insert(from.clone(), to.clone());
    e.rename(&map)
}

fn unequal_pair(name: &Sym, a: Variance, b: Variance) -> Result<()> {
    if a == b {
        return Err(Error::Validation { index: name.to_string(), reason: "dummy pair with equal variance".into() });
    }
    Ok(())
}

struct CurvedEval<'p> {
    prog: &'p Program,
    fresh: Fresh,
    cache: BTreeMap<Sym, Value>,
}

impl<'p> CurvedEval<'p> {
    fn new(prog: &'p Program) -> Self {
        CurvedEval { prog, fresh: Fresh::new(), cache: BTreeMap::new() }
    }

    /// `v.free` holds placeholder names positionally matching `uses`. Bind
    /// each placeholder to its use-site name; a name used twice becomes a
    /// contraction through `ginv`.
    fn bind(&mut self, v: Value, uses: &[Index]) -> Result<Value> {
        debug_assert_eq!(v.free.len(), uses.len());
        let mut first: BTreeMap<&Sym, (usize, bool)> = BTreeMap::new();
        let mut expr = v.expr;
        for (k, u) in uses.iter().enumerate() {
            match first.get_mut(&u.name) {
                None => {
                    first.insert(&u.name, (k, false));
                }
                Some((j, paired)) => {
                    if *paired {
                        return Err(Error::Validation { index: u.name.to_string(), reason: "occurs 3 times".into() });
                    }
                    unequal_pair(&u.name, uses[*j].var, u.var)?;
                    *paired = true;
                    expr = times_factor(&expr, &ginv(&v.free[*j].name, &v.free[k].name));
                }
            }
        }
        let mut map = BTreeMap::new();
        let mut free = Vec::new();
        for (k, u) in uses.iter().enumerate() {
            let (j, paired) = first[&u.name];
            if !paired && j == k {
                map.insert(v.free[k].name.clone(), u.name.clone());
                free.push(u.clone());
            }
        }
        // dummies of `expr` must not capture use-site names
        let names: BTreeSet<Sym> = free.iter().map(|i| i.name.clone()).collect();
        self.fresh.reserve(names.iter());
        for t in &mut expr.terms {
            t.freshen_dummies(&names, &mut self.fresh);
        }
        Ok(Value { expr: expr.rename(&map), free })
    }

    fn leaf(&mut self, head: &str, uses: &[Index]) -> Result<Value> {
        let tmp: Vec<Sym> = uses.iter().map(|_| self.fresh.name()).collect();
        let f = Factor::new(head, tmp.iter().map(|n| Index::lo(n.clone())).collect());
        let free = tmp.into_iter().zip(uses).map(|(n, u)| Index::new(n, u.var)).collect();
        self.bind(Value { expr: TensorExpr::from_factor(f), free }, uses)
    }

    fn macro_value(&mut self, d: &Def) -> Result<Value> {
        if let Some(v) = self.cache.get(&d.name) {
            return Ok(v.clone());
        }
        let v = self.eval(&d.body)?;
        let got: BTreeSet<&Sym> = v.free.iter().map(|i| &i.name).collect();
        let want: BTreeSet<&Sym> = d.params.iter().map(|i| &i.name).collect();
        if !v.expr.is_zero() && got != want {
            return Err(Error::Validation {
                index: d.name.to_string(),
                reason: "macro body free indices differ from its parameters".into(),
            });
        }
        let v = Value { expr: v.expr, free: d.params.clone() };
        self.cache.insert(d.name.clone(), v.clone());
        Ok(v)
    }

    fn instantiate(&mut self, d: &Def, uses: &[Index]) -> Result<Value> {
        let body = self.macro_value(d)?;
        let mut expr = body.expr;
        self.fresh.reserve(expr.all_names().iter());
        for t in &mut expr.terms {
            t.freshen_all_dummies(&mut self.fresh);
        }
        let mut map = BTreeMap::new();
        let mut free = Vec::with_capacity(uses.len());
        for (p, u) in body.free.iter().zip(uses) {
            let n = self.fresh.name();
            map.insert(p.name.clone(), n.clone());
            free.push(Index::new(n, u.var));
        }
        self.bind(Value { expr: expr.rename(&map), free }, uses)
    }

    /// Product; free names shared by both operands contract through `ginv`.
    fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        let mut bexpr = b.expr;
        let mut bfree = b.free;
        let mut joins = Vec::new();
        for i in &a.free {
            if let Some(j) = bfree.iter_mut().find(|j| j.name == i.name) {
                unequal_pair(&i.name, i.var, j.var)?;
                let y = self.fresh.name();
                bexpr = rename_one(&bexpr, &i.name, &y);
                j.name = y.clone();
                joins.push((i.name.clone(), y));
            }
        }
        let mut expr = a.expr.mul_with(&bexpr, &mut self.fresh);
        for (x, y) in &joins {
            expr = times_factor(&expr, &ginv(x, y));
        }
        let gone: BTreeSet<&Sym> = joins.iter().flat_map(|(x, y)| [x, y]).collect();
        let free = a.free.iter().chain(bfree.iter()).filter(|i| !gone.contains(&i.name)).cloned().collect();
        Ok(Value { expr, free })
    }

    /// `nabla_i` of a lowered value.
    fn covariant(&mut self, v: Value, i: &Index) -> Result<Value> {
        let mut expr = v.expr;
        let mut free = v.free;
        let names: BTreeSet<Sym> = std::iter::once(i.name.clone()).collect();
        self.fresh.reserve(expr.all_names().iter());
        self.fresh.reserve(names.iter());
        for t in &mut expr.terms {
            t.freshen_dummies(&names, &mut self.fresh);
        }
        // an inner free index with the derivative's name is contracted
        let mut join = None;
        if let Some(f) = free.iter_mut().find(|f| f.name == i.name) {
            unequal_pair(&i.name, f.var, i.var)?;
            let y = self.fresh.name();
            expr = rename_one(&expr, &i.name, &y);
            f.name = y.clone();
            join = Some(y);
        }
        let mut out = total_derivative_unchecked(&expr, &Index::lo(i.name.clone()));
        for f in &free {
            let l = self.fresh.name();
            let gamma = Factor::new(GAMMA, vec![Index::up(l.clone()), Index::lo(i.name.clone()), Index::lo(f.name.clone())]);
            out = out - times_factor(&rename_one(&expr, &f.name, &l), &gamma);
        }
        match join {
            Some(y) => {
                out = times_factor(&out, &ginv(&i.name, &y));
                free.retain(|f| f.name != y);
            }
            None => free.push(i.clone()),
        }
        Ok(Value { expr: out, free })
    }

    fn eval(&mut self, n: &Node) -> Result<Value> {
        Ok(match n {
            Node::Num(q) => Value { expr: TensorExpr::constant(q.clone()), free: vec![] },
            Node::Neg(inner) => {
                let v = self.eval(inner)?;
                Value { expr: -v.expr, free: v.free }
            }
            Node::Sum(parts) => {
                let mut acc: Option<Value> = None;
                for p in parts {
                    let v = self.eval(p)?;
                    acc = Some(match acc {
                        None => v,
                        Some(mut a) => {
                            let fa: BTreeSet<&Index> = a.free.iter().collect();
                            let fv: BTreeSet<&Index> = v.free.iter().collect();
                            if fa != fv {
                                let bad = fa.symmetric_difference(&fv).next().map(|i| i.to_string()).unwrap_or_default();
                                return Err(Error::Validation { index: bad, reason: "summands differ in free indices".into() });
                            }
                            a.expr.extend(v.expr);
                            a
                        }
                    });
                }
                acc.unwrap_or(Value { expr: TensorExpr::zero(), free: vec![] })
            }
            Node::Prod(parts) => {
                let mut acc = Value { expr: TensorExpr::one(), free: vec![] };
                for p in parts {
                    let v = self.eval(p)?;
                    acc = self.mul(acc, v)?;
                }
                acc
            }
            Node::Deriv { idx, inner, .. } => {
                let mut v = self.eval(inner)?;
                for i in idx.iter().rev() {
                    v = self.covariant(v, i)?;
                }
                v
            }
            Node::Sym { name, idx, pos, .. } => match self.prog.resolve(name.as_str()) {
                None => {
                    return Err(Error::UnknownSymbol(format!("{name} at line {}, column {}", pos.line, pos.col)));
                }
                Some(Resolved::Param) => Value { expr: TensorExpr::param(name.clone()), free: vec![] },
                Some(Resolved::Field(_)) => self.leaf(name.as_str(), idx)?,
                Some(Resolved::Builtin(_)) if name.as_str() == ETA || name.as_str() == DELTA => self.leaf(G, idx)?,
                Some(Resolved::Builtin(_)) => {
                    return Err(Error::Unsupported(format!("`{name}` in a Lagrangian promoted to curved space")));
                }
                Some(Resolved::Def(d)) => {
                    let d = d.clone();
                    self.instantiate(&d, idx)?
                }
            },
        })
    }
}

/// Reject fields carrying two or more stacked derivatives outside macros:
/// the order of the covariant derivatives would be a guess.
fn check_first_order(p: &Program, n: &Node) -> Result<()> {
    let mut bad = None;
    n.visit_syms(0, &mut |name, _, depth, pos| {
        if depth >= 2 && bad.is_none() && matches!(p.resolve(name.as_str()), Some(Resolved::Field(_))) {
            bad = Some(Error::Unsupported(format!(
                "{depth} derivatives stacked on `{name}` at line {}, column {}; write second derivatives through a curvature macro",
                pos.line, pos.col
            )));
        }
    });
    bad.map_or(Ok(()), Err)
}

/// Promote the program's Lagrangian: `d` becomes the covariant derivative,
/// `eta` becomes `g`, upper indices are raised with `ginv` and one `sqrtg`
/// multiplies every term. Christoffel symbols stay as `Gamma` heads.
pub fn promote_to_curved(p: &Program) -> Result<CurvedLagrangian> {
    let node = p.lagrangian.as_ref().ok_or_else(|| Error::Usage("program has no lagrangian".into()))?;
    check_first_order(p, node)?;
    let v = CurvedEval::new(p).eval(node)?;
    if let Some(i) = v.free.first() {
        return Err(Error::Validation { index: i.to_string(), reason: "Lagrangian has free indices".into() });
    }
    let expr = times_factor(&v.expr, &Factor::new(SQRTG, vec![]));
    Ok(CurvedLagrangian { expr: canonicalize(&expr, &p.registry())? })
}

/// Covariant field strength of a declared field, all indices lower.
///
/// A rank-2 potential gives
/// `1/2 (nabla_mu nabla_al h_{nu be} + nabla_nu nabla_be h_{mu al}
///  - nabla_mu nabla_be h_{nu al} - nabla_nu nabla_al h_{mu be})`
/// with free indices `mu nu al be`. A rank-1 potential gives
/// `nabla_a A_b - nabla_b A_a`, where the Christoffel terms cancel.
pub fn covariant_curvature(p: &Program, field: &str) -> Result<TensorExpr> {
    let decl = p.field(field).ok_or_else(|| Error::UnknownSymbol(field.to_string()))?;
    let src = match decl.rank {
        2 => format!(
            "1/2 * (d[mu] d[al] {field}[nu,be] + d[nu] d[be] {field}[mu,al] \
             - d[mu] d[be] {field}[nu,al] - d[nu] d[al] {field}[mu,be])"
        ),
        1 => format!("d[a] {field}[b] - d[b] {field}[a]"),
        0 => {
            return Err(Error::Unsupported(format!(
                "covariant curvature of the scalar `{field}`: its covariant derivative is the partial one"
            )))
        }
        r => return Err(Error::Unsupported(format!("covariant curvature of the rank-{r} field `{field}`"))),
    };
    let v = CurvedEval::new(p).eval(&parse_expression(&src)?)?;
    canonicalize(&v.expr, &p.registry())
}

/// True for `Gamma` and for any metric head carrying derivatives.
pub fn is_metric_derivative(f: &Factor) -> bool {
    let h = f.head.as_str();
    h == GAMMA || (!f.derivs.is_empty() && (h == G || h == GINV || h == SQRTG))
}

/// Restriction to the flat metric: terms with a metric derivative or a
/// Christoffel symbol vanish, `g` and `ginv` become `eta`, `sqrtg` becomes 1.
/// Not canonicalized.
pub fn flat_restriction(e: &TensorExpr) -> TensorExpr {
    let mut out = TensorExpr::zero().with_dim(e.dim);
    'terms: for t in &e.terms {
        let mut nt = Term { coeff: t.coeff.clone(), params: t.params.clone(), factors: Vec::with_capacity(t.factors.len()) };
        for f in &t.factors {
            if is_metric_derivative(f) {
                continue 'terms;
            }
            match f.head.as_str() {
                SQRTG => {}
                G | GINV => nt.factors.push(Factor::new(ETA, f.slots.clone())),
                _ => nt.factors.push(f.clone()),
            }
        }
        out.push(nt);
    }
    out
}
