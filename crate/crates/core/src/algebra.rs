//! Total derivatives and field substitution.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{Factor, Fresh, Index, Sym, Term, TensorExpr};
use crate::registry::{DELTA, ETA};

/// Leibniz rule on one term. `eta` and `delta` are constant; a term
/// without factors differentiates to nothing.
pub fn derivative_term(t: &Term, idx: &Index) -> Vec<Term> {
    let mut out = Vec::new();
    for (k, f) in t.factors.iter().enumerate() {
        if f.head.as_str() == ETA || f.head.as_str() == DELTA {
            continue;
        }
        let mut nt = t.clone();
        nt.factors[k].derivs.insert(0, idx.clone());
        out.push(nt);
    }
    out
}

/// `∂_idx e` by the Leibniz rule. The index must not already occur in `e`.
pub fn total_derivative(e: &TensorExpr, idx: &Index) -> Result<TensorExpr> {
    if e.terms.iter().any(|t| t.indices().any(|i| i.name == idx.name)) {
        return Err(Error::IndexCollision(idx.name.to_string()));
    }
    Ok(total_derivative_unchecked(e, idx))
}

/// As [`total_derivative`] for callers that guarantee freshness.
pub fn total_derivative_unchecked(e: &TensorExpr, idx: &Index) -> TensorExpr {
    let mut out = TensorExpr::zero().with_dim(e.dim);
    for t in &e.terms {
        for nt in derivative_term(t, idx) {
            out.push(nt);
        }
    }
    out
}

/// Apply several derivatives, outermost first.
pub fn total_derivatives(e: &TensorExpr, idxs: &[Index]) -> TensorExpr {
    let mut cur = e.clone();
    for i in idxs.iter().rev() {
        cur = total_derivative_unchecked(&cur, i);
    }
    cur
}

/// A substitution rule `field[placeholders] -> rule`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub field: Sym,
    pub placeholders: Vec<Index>,
    pub rule: TensorExpr,
}

impl Rule {
    pub fn new(field: impl Into<Sym>, placeholders: Vec<Index>, rule: TensorExpr) -> Result<Rule> {
        let field = field.into();
        let free = rule.free_indices();
        if !rule.is_zero() {
            let mut want: Vec<Index> = placeholders.clone();
            want.sort();
            if want != free {
                return Err(Error::Arity {
                    name: field.to_string(),
                    expected: placeholders.len(),
                    found: free.len(),
                });
            }
        }
        Ok(Rule { field, placeholders, rule })
    }

    /// The rule instantiated at the given slots and derivatives, with
    /// internal dummies renamed through `fresh`.
    pub fn instantiate(&self, f: &Factor, fresh: &mut Fresh) -> Result<TensorExpr> {
        if f.slots.len() != self.placeholders.len() {
            return Err(Error::Arity {
                name: self.field.to_string(),
                expected: self.placeholders.len(),
                found: f.slots.len(),
            });
        }
        let mut body = self.rule.clone();
        for t in &mut body.terms {
            t.freshen_all_dummies(fresh);
        }
        // Placeholders go to fresh names first so that slot names never
        // collide with them during renaming.
        let mut to_tmp = BTreeMap::new();
        let mut bridges = Vec::new();
        for (p, s) in self.placeholders.iter().zip(f.slots.iter()) {
            let tmp = fresh.name();
            to_tmp.insert(p.name.clone(), tmp.clone());
            if p.var == s.var {
                bridges.push((tmp, s.name.clone(), None));
            } else {
                // Variance differs: contract through eta.
                bridges.push((tmp.clone(), fresh.name(), Some(s.clone())));
            }
        }
        body = body.rename(&to_tmp);
        let mut final_map = BTreeMap::new();
        let mut etas = Vec::new();
        for (tmp, target, bridge) in bridges {
            match bridge {
                None => {
                    final_map.insert(tmp, target);
                }
                Some(slot) => {
                    // body has `tmp` with the placeholder variance (opposite to slot).
                    let link = target;
                    final_map.insert(tmp, link.clone());
                    let inner = Index::new(link, slot.var);
                    etas.push(Factor::eta(inner, slot.clone()));
                }
            }
        }
        body = body.rename(&final_map);
        if !etas.is_empty() {
            for t in &mut body.terms {
                t.factors.extend(etas.iter().cloned());
            }
        }
        for d in f.derivs.iter().rev() {
            body = total_derivative_unchecked(&body, d);
        }
        Ok(body)
    }
}

/// Replace every occurrence of `rule.field`. The result is a flat sum but is
/// not canonicalized.
pub fn substitute(e: &TensorExpr, rule: &Rule) -> Result<TensorExpr> {
    let mut out = TensorExpr::zero().with_dim(e.dim);
    let mut fresh = Fresh::avoiding(e.all_names().iter().chain(rule.rule.all_names().iter()));
    for t in &e.terms {
        if !t.factors.iter().any(|f| f.head == rule.field) {
            out.push(t.clone());
            continue;
        }
        let mut parts = Vec::with_capacity(t.factors.len() + 1);
        parts.push(TensorExpr::from_term(Term {
            coeff: t.coeff.clone(),
            params: t.params.clone(),
            factors: Vec::new(),
        }));
        for f in &t.factors {
            if f.head == rule.field {
                parts.push(rule.instantiate(f, &mut fresh)?);
            } else {
                parts.push(TensorExpr::from_factor(f.clone()));
            }
        }
        let prod = TensorExpr::product(&parts, &mut fresh);
        for nt in prod.terms {
            out.push(nt);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonicalize;
    use crate::expr::rat;
    use crate::registry::Registry;

    fn h(d: &[Index], s: [Index; 2]) -> Factor {
        Factor::new("h", s.to_vec()).with_derivs(d.to_vec())
    }

    #[test]
    fn derivative_of_single_factor_prepends() {
        let e = TensorExpr::from_factor(h(&[], [Index::lo("al"), Index::lo("be")]));
        let d = total_derivative(&e, &Index::lo("mu")).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].factors[0].derivs, vec![Index::lo("mu")]);
    }

    #[test]
    fn derivative_collision_is_error() {
        let e = TensorExpr::from_factor(h(&[], [Index::lo("mu"), Index::lo("be")]));
        assert!(matches!(total_derivative(&e, &Index::lo("mu")), Err(Error::IndexCollision(_))));
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let e = TensorExpr::constant(rat(3, 1));
        assert!(total_derivative(&e, &Index::lo("mu")).unwrap().is_zero());
        let eta = TensorExpr::from_factor(Factor::eta(Index::up("a"), Index::up("b")));
        assert!(total_derivative(&eta, &Index::lo("mu")).unwrap().is_zero());
    }

    #[test]
    fn substitute_constant_kills_derivative() {
        let reg = Registry::standard();
        let e = TensorExpr::from_factor(Factor::new("phi", vec![]).with_derivs(vec![Index::lo("mu")]));
        let r = Rule::new("phi", vec![], TensorExpr::constant(rat(5, 1))).unwrap();
        let s = substitute(&e, &r).unwrap();
        assert!(canonicalize(&s, &reg).unwrap().is_zero());
    }

    #[test]
    fn substitute_absent_field_is_noop() {
        let e = TensorExpr::from_factor(h(&[Index::lo("mu")], [Index::lo("a"), Index::lo("b")]));
        let r = Rule::new("A", vec![Index::lo("x")], TensorExpr::from_factor(Factor::new("xi", vec![Index::lo("x")]))).unwrap();
        assert_eq!(substitute(&e, &r).unwrap(), e);
    }

    #[test]
    fn substitute_arity_mismatch() {
        let e = TensorExpr::from_factor(Factor::new("A", vec![Index::lo("a")]));
        let r = Rule {
            field: "A".into(),
            placeholders: vec![Index::lo("x"), Index::lo("y")],
            rule: TensorExpr::from_factor(Factor::new("h", vec![Index::lo("x"), Index::lo("y")])),
        };
        assert!(matches!(substitute(&e, &r), Err(Error::Arity { .. })));
    }

    #[test]
    fn substitute_bridges_variance() {
        let reg = Registry::standard();
        // A^a with rule A_x -> xi_x gives xi^a.
        let e = TensorExpr::from_factor(Factor::new("A", vec![Index::up("a")]));
        let r = Rule::new("A", vec![Index::lo("x")], TensorExpr::from_factor(Factor::new("xi", vec![Index::lo("x")]))).unwrap();
        let s = canonicalize(&substitute(&e, &r).unwrap(), &reg).unwrap();
        let want = TensorExpr::from_factor(Factor::new("xi", vec![Index::up("a")]));
        assert_eq!(s, want);
    }
}
