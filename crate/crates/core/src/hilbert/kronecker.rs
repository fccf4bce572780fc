//! Symmetrized Kronecker-delta combinations produced by differentiating
//! metric jets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{rat, Factor, Fresh, Index, Sym, Term, TensorExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KroneckerKind {
    /// `Delta^{gr}_{na} = 1/2 (delta^g_n delta^r_a + delta^g_a delta^r_n)`.
    Delta,
    /// `Delta^{wgr}_{mna} = -delta^w_m Delta^{gr}_{na} + delta^w_a Delta^{gr}_{mn}
    /// + delta^w_n Delta^{gr}_{ma}`.
    DeltaBar,
    /// `Delta^{xwgr}_{ambc} = -Delta^{xw}_{am} Delta^{gr}_{bc}
    /// + Delta^{xw}_{ac} Delta^{gr}_{mb} + Delta^{xw}_{ab} Delta^{gr}_{mc}`.
    DeltaHat,
}

impl KroneckerKind {
    fn arity(self) -> usize {
        match self {
            KroneckerKind::Delta => 2,
            KroneckerKind::DeltaBar => 3,
            KroneckerKind::DeltaHat => 4,
        }
    }
}

/// One combination with its upper and lower index names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KroneckerCombination {
    pub kind: KroneckerKind,
    pub upper: Vec<Sym>,
    pub lower: Vec<Sym>,
}

fn delta(up: &Sym, lo: &Sym) -> Factor {
    Factor::delta(Index::up(up.clone()), Index::lo(lo.clone()))
}

fn sym_pair(g: &Sym, r: &Sym, n: &Sym, a: &Sym) -> TensorExpr {
    TensorExpr::from_terms(vec![
        Term::new(rat(1, 2), vec![delta(g, n), delta(r, a)]),
        Term::new(rat(1, 2), vec![delta(g, a), delta(r, n)]),
    ])
}

impl KroneckerCombination {
    pub fn new(kind: KroneckerKind, upper: &[&str], lower: &[&str]) -> Result<Self> {
        if upper.len() != kind.arity() || lower.len() != kind.arity() {
            return Err(Error::Arity { name: format!("{kind:?}"), expected: kind.arity(), found: upper.len().min(lower.len()) });
        }
        let mut all: Vec<&str> = upper.iter().chain(lower.iter()).copied().collect();
        all.sort();
        all.dedup();
        if all.len() != 2 * kind.arity() {
            return Err(Error::Validation { index: format!("{kind:?}"), reason: "index names must be distinct".into() });
        }
        Ok(KroneckerCombination {
            kind,
            upper: upper.iter().map(|s| Sym::from(*s)).collect(),
            lower: lower.iter().map(|s| Sym::from(*s)).collect(),
        })
    }

    /// The signed sum of Kronecker-delta products it stands for.
    pub fn expand(&self) -> TensorExpr {
        let (u, l) = (&self.upper, &self.lower);
        match self.kind {
            KroneckerKind::Delta => sym_pair(&u[0], &u[1], &l[0], &l[1]),
            KroneckerKind::DeltaBar => {
                let (w, g, r) = (&u[0], &u[1], &u[2]);
                let (m, n, a) = (&l[0], &l[1], &l[2]);
                let part = |d: Factor, x: &Sym, y: &Sym, c: i64| {
                    let mut e = sym_pair(g, r, x, y).scale(&rat(c, 1));
                    for t in &mut e.terms {
                        t.factors.push(d.clone());
                    }
                    e
                };
                part(delta(w, m), n, a, -1) + part(delta(w, a), m, n, 1) + part(delta(w, n), m, a, 1)
            }
            KroneckerKind::DeltaHat => {
                let (x, w, g, r) = (&u[0], &u[1], &u[2], &u[3]);
                let (a, m, b, c) = (&l[0], &l[1], &l[2], &l[3]);
                let mut fresh = Fresh::avoiding(u.iter().chain(l.iter()));
                let part = |p: &Sym, q: &Sym, s: &Sym, t: &Sym, k: i64, fresh: &mut Fresh| {
                    sym_pair(x, w, p, q).mul_with(&sym_pair(g, r, s, t), fresh).scale(&rat(k, 1))
                };
                part(a, m, b, c, -1, &mut fresh) + part(a, c, m, b, 1, &mut fresh) + part(a, b, m, c, 1, &mut fresh)
            }
        }
    }
}
