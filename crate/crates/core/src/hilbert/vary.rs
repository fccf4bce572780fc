//! Metric Euler derivative of a curved Lagrangian.

use serde::{Deserialize, Serialize};

use crate::algebra::total_derivatives;
use crate::canon::canonicalize;
use crate::error::{Error, Result};
use crate::expr::{rat, Factor, Fresh, Index, Sym, Term, TensorExpr, Variance};
use crate::registry::{is_metric_head, Registry, G, GAMMA, GINV, SQRTG};
use crate::variational::{jet_derivative_raw, JetVariable};

use super::promote::{ginv, CurvedLagrangian};
use super::prune::{grade, survives};

/// Internal names of the variation indices `g_{ga rh}`.
pub const VAR_INDICES: (&str, &str) = ("_g", "_r");
const OMEGA: &str = "_o";
const XI: &str = "_q";

/// How the derivative pieces are totally differentiated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationMode {
    /// Full Leibniz rule on every factor; the result is exact at any metric.
    Exact,
    /// Only the part that survives at the flat metric: terms with two or
    /// more metric derivatives are dropped, and total derivatives skip the
    /// metric factors. Agrees with `Exact` after flat restriction.
    #[default]
    FlatSurviving,
}

fn sym(s: &str) -> Sym {
    Sym::from(s)
}

fn expect_vars(f: &Factor, want: &[Variance]) -> Result<()> {
    if f.slots.iter().map(|i| i.var).ne(want.iter().copied()) {
        return Err(Error::Unsupported(format!("`{}` with slot variances {:?}", f.head, f.slots)));
    }
    Ok(())
}

/// Rewrite of one factor in terms of `ginv`, `sqrtg` and partial
/// derivatives of `g`, or `None` when the factor is already in that form.
fn expand_factor(f: &Factor, fresh: &mut Fresh) -> Result<Option<TensorExpr>> {
    let h = f.head.as_str();
    let (base, outer) = match h {
        GAMMA => {
            expect_vars(f, &[Variance::Up, Variance::Lo, Variance::Lo])?;
            let (l, n, a) = (&f.slots[0].name, &f.slots[1].name, &f.slots[2].name);
            let m = fresh.name();
            let dg = |d: &Sym, x: &Sym, y: &Sym, c: i64| {
                Term::new(
                    rat(c, 2),
                    vec![
                        ginv(&m, l),
                        Factor::new(G, vec![Index::lo(x.clone()), Index::lo(y.clone())]).with_derivs(vec![Index::lo(d.clone())]),
                    ],
                )
            };
            let base = TensorExpr::from_terms(vec![dg(&m, n, a, -1), dg(a, &m, n, 1), dg(n, &m, a, 1)]);
            (base, &f.derivs[..])
        }
        GINV | SQRTG if !f.derivs.is_empty() => {
            let (c, outer) = f.derivs.split_last().unwrap();
            let (k, l) = (fresh.name(), fresh.name());
            let dg = Factor::new(G, vec![Index::lo(k.clone()), Index::lo(l.clone())]).with_derivs(vec![c.clone()]);
            let term = if h == GINV {
                expect_vars(f, &[Variance::Up, Variance::Up])?;
                let (a, b) = (&f.slots[0].name, &f.slots[1].name);
                Term::new(rat(-1, 1), vec![ginv(a, &k), ginv(b, &l), dg])
            } else {
                Term::new(rat(1, 2), vec![Factor::new(SQRTG, vec![]), ginv(&k, &l), dg])
            };
            (TensorExpr::from_term(term), outer)
        }
        _ => return Ok(None),
    };
    Ok(Some(total_derivatives(&base, outer)))
}

/// Replace Christoffel symbols and derivatives of `ginv` and `sqrtg` by
/// their expressions in partial derivatives of `g`. Not canonicalized.
pub fn expand_metric_derivatives(e: &TensorExpr) -> Result<TensorExpr> {
    let mut out = TensorExpr::zero().with_dim(e.dim);
    let mut work: Vec<Term> = e.terms.iter().rev().cloned().collect();
    while let Some(t) = work.pop() {
        let mut fresh = Fresh::avoiding(t.all_names().iter());
        let mut hit = None;
        for (k, f) in t.factors.iter().enumerate() {
            if let Some(x) = expand_factor(f, &mut fresh)? {
                hit = Some((k, x));
                break;
            }
        }
        match hit {
            None => out.push(t),
            Some((k, x)) => {
                let mut rest = t.clone();
                rest.factors.remove(k);
                let prod = TensorExpr::from_term(rest).mul_with(&x, &mut fresh);
                work.extend(prod.terms.into_iter().rev());
            }
        }
    }
    Ok(out)
}

/// `d/dg_{ga rh}` of the undifferentiated `sqrtg` and `ginv` factors.
fn inverse_metric_partial(e: &TensorExpr) -> TensorExpr {
    let (g, r) = (sym(VAR_INDICES.0), sym(VAR_INDICES.1));
    let mut out = TensorExpr::zero().with_dim(e.dim);
    for t in &e.terms {
        for (k, f) in t.factors.iter().enumerate() {
            if !f.derivs.is_empty() {
                continue;
            }
            let mut rest = t.clone();
            rest.factors.remove(k);
            match f.head.as_str() {
                SQRTG => {
                    let mut nt = rest.scaled(&rat(1, 2));
                    nt.factors.push(f.clone());
                    nt.factors.push(ginv(&g, &r));
                    out.push(nt);
                }
                GINV => {
                    let (a, b) = (&f.slots[0].name, &f.slots[1].name);
                    for (x, y) in [(&g, &r), (&r, &g)] {
                        let mut nt = rest.clone().scaled(&rat(-1, 2));
                        nt.factors.push(ginv(x, a));
                        nt.factors.push(ginv(y, b));
                        out.push(nt);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Leibniz rule restricted to non-metric factors.
fn matter_derivative(e: &TensorExpr, idx: &Index) -> TensorExpr {
    let mut out = TensorExpr::zero().with_dim(e.dim);
    for t in &e.terms {
        for (k, f) in t.factors.iter().enumerate() {
            let h = f.head.as_str();
            if is_metric_head(h) || h == crate::registry::ETA || h == crate::registry::DELTA {
                continue;
            }
            let mut nt = t.clone();
            nt.factors[k].derivs.insert(0, idx.clone());
            out.push(nt);
        }
    }
    out
}

fn derivatives(e: &TensorExpr, idxs: &[Index], mode: VariationMode) -> TensorExpr {
    match mode {
        VariationMode::Exact => total_derivatives(e, idxs),
        VariationMode::FlatSurviving => {
            let mut cur = e.clone();
            for i in idxs.iter().rev() {
                cur = matter_derivative(&cur, i);
            }
            cur
        }
    }
}

/// The three pieces `dL/dg`, `d_w dL/d(d_w g)` and `d_x d_w dL/d(d_x d_w g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerPieces {
    pub metric: TensorExpr,
    pub first: TensorExpr,
    pub second: TensorExpr,
}

impl EulerPieces {
    /// `metric - first + second`, canonicalized.
    pub fn total(&self, reg: &Registry) -> Result<TensorExpr> {
        canonicalize(&(self.metric.clone() - self.first.clone() + self.second.clone()), reg)
    }
}

/// Euler pieces of `c` with respect to `g_{_g _r}`; free indices `^_g ^_r`.
pub fn euler_pieces(c: &CurvedLagrangian, reg: &Registry, mode: VariationMode) -> Result<EulerPieces> {
    let mut e = canonicalize(&expand_metric_derivatives(&c.expr)?, reg)?;
    if mode == VariationMode::FlatSurviving {
        e.terms.retain(|t| survives(t, 2));
    }
    let (g, r) = (Index::lo(VAR_INDICES.0), Index::lo(VAR_INDICES.1));
    let (o, q) = (Index::lo(OMEGA), Index::lo(XI));
    let jet = |derivs: Vec<Index>| -> Result<TensorExpr> {
        let v = JetVariable::new(G, derivs, vec![g.clone(), r.clone()])?;
        canonicalize(&jet_derivative_raw(&e, &v, reg)?, reg)
    };
    let metric = || -> Result<TensorExpr> {
        let mut flat = e.clone();
        if mode == VariationMode::FlatSurviving {
            flat.terms.retain(|t| grade(t) == 0);
        }
        let raw = inverse_metric_partial(&flat) + jet_derivative_raw(&flat, &JetVariable::new(G, vec![], vec![g.clone(), r.clone()])?, reg)?;
        canonicalize(&raw, reg)
    };
    let first = || -> Result<TensorExpr> {
        let p1 = jet(vec![o.clone()])?;
        canonicalize(&derivatives(&p1, std::slice::from_ref(&o), mode), reg)
    };
    let second = || -> Result<TensorExpr> {
        let p2 = jet(vec![q.clone(), o.clone()])?;
        canonicalize(&derivatives(&p2, &[q.clone(), o.clone()], mode), reg)
    };
    let (m, (f, s)) = rayon::join(metric, || rayon::join(first, second));
    Ok(EulerPieces { metric: m?, first: f?, second: s? })
}

/// `dL/dg_{ga rh}` with free indices `^_g ^_r`.
pub fn metric_variation(c: &CurvedLagrangian, reg: &Registry, mode: VariationMode) -> Result<TensorExpr> {
    euler_pieces(c, reg, mode)?.total(reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::equal;
    use crate::corpus;
    use crate::dsl::parse;
    use crate::hilbert::promote::promote_to_curved;

    fn named(e: &TensorExpr) -> TensorExpr {
        let map = [(sym(VAR_INDICES.0), sym("ga")), (sym(VAR_INDICES.1), sym("rh"))].into_iter().collect();
        e.rename(&map)
    }

    #[test]
    fn constant_density_varies_through_the_jacobian() {
        let p = parse("field q {rank:0} param c lagrangian = c").unwrap();
        let cl = promote_to_curved(&p).unwrap();
        for mode in [VariationMode::Exact, VariationMode::FlatSurviving] {
            let v = named(&metric_variation(&cl, &p.registry(), mode).unwrap());
            let want = p.parse_expr("1/2 * c sqrtg ginv[^ga,^rh]").unwrap();
            assert!(equal(&v, &want, &p.registry()).unwrap());
        }
    }

    #[test]
    fn maxwell_metric_partial() {
        let p = corpus::em();
        let reg = p.registry();
        let cl = promote_to_curved(&p).unwrap();
        let pieces = euler_pieces(&cl, &reg, VariationMode::Exact).unwrap();
        assert!(pieces.first.is_zero() && pieces.second.is_zero());
        let want = p
            .parse_expr(
                "1/2 * sqrtg F[al,be] F[mu,nu] (ginv[^nu,^be] ginv[^rh,^mu] ginv[^ga,^al]
                 - 1/4 * ginv[^ga,^rh] ginv[^be,^nu] ginv[^al,^mu])",
            )
            .unwrap();
        assert!(equal(&named(&pieces.metric), &want, &reg).unwrap());
    }

    #[test]
    fn christoffel_expansion() {
        let p = parse("field q {rank:0} lagrangian = q").unwrap();
        let reg = p.registry();
        let e = expand_metric_derivatives(&p.parse_expr("Gamma[^l,n,a]").unwrap()).unwrap();
        let want = p
            .parse_expr("1/2 * ginv[^m,^l] (-d[m] g[n,a] + d[a] g[m,n] + d[n] g[m,a])")
            .unwrap();
        assert!(equal(&e, &want, &reg).unwrap());
        let e = expand_metric_derivatives(&p.parse_expr("d[c] ginv[^a,^b]").unwrap()).unwrap();
        let want = p.parse_expr("-ginv[^a,^k] ginv[^b,^l] d[c] g[k,l]").unwrap();
        assert!(equal(&e, &want, &reg).unwrap());
        // second derivatives expand recursively
        let e = expand_metric_derivatives(&p.parse_expr("d[e] d[c] sqrtg").unwrap()).unwrap();
        assert!(e.terms.iter().all(|t| t.factors.iter().all(|f| f.head.as_str() != GINV || f.derivs.is_empty())));
        let want = p
            .parse_expr(
                "1/4 * sqrtg ginv[^m,^n] d[e] g[m,n] ginv[^k,^l] d[c] g[k,l]
                 - 1/2 * sqrtg ginv[^k,^m] ginv[^l,^n] d[e] g[m,n] d[c] g[k,l]
                 + 1/2 * sqrtg ginv[^k,^l] d[e] d[c] g[k,l]",
            )
            .unwrap();
        assert!(equal(&e, &want, &reg).unwrap());
    }
}
