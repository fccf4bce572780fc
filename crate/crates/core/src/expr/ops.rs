//! Structural arithmetic on expressions. Nothing here merges like terms;
//! that is the canonicalizer's job.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::Zero;

use super::{Dim, Fresh, Rational, Sym, Term, TensorExpr};

impl Dim {
    pub fn join(self, other: Dim) -> Dim {
        match (self, other) {
            (Dim::Fixed(a), _) => Dim::Fixed(a),
            (_, Dim::Fixed(b)) => Dim::Fixed(b),
            _ => Dim::Symbolic,
        }
    }
}

impl Term {
    /// Rename the dummies of `self` that appear in `avoid` to fresh names.
    pub fn freshen_dummies(&mut self, avoid: &BTreeSet<Sym>, fresh: &mut Fresh) {
        let clashes: Vec<Sym> = self
            .dummy_names()
            .into_iter()
            .filter(|n| avoid.contains(n))
            .collect();
        if clashes.is_empty() {
            return;
        }
        let map: BTreeMap<Sym, Sym> = clashes.into_iter().map(|n| (n, fresh.name())).collect();
        self.rename(&map);
    }

    /// Rename every dummy to a fresh name.
    pub fn freshen_all_dummies(&mut self, fresh: &mut Fresh) {
        let map: BTreeMap<Sym, Sym> = self
            .dummy_names()
            .into_iter()
            .map(|n| (n, fresh.name()))
            .collect();
        if !map.is_empty() {
            self.rename(&map);
        }
    }

    /// Product of two terms. Equal free names across the operands contract;
    /// internal dummies are renamed so they never collide.
    pub fn mul(&self, other: &Term, fresh: &mut Fresh) -> Term {
        let mut a = self.clone();
        let mut b = other.clone();
        let names_a = a.all_names();
        fresh.reserve(names_a.iter());
        fresh.reserve(b.all_names().iter());
        b.freshen_dummies(&names_a, fresh);
        let free_b: BTreeSet<Sym> = b.free_indices().into_iter().map(|i| i.name).collect();
        a.freshen_dummies(&free_b, fresh);
        a.coeff *= b.coeff;
        a.params.extend(b.params);
        a.params.sort();
        a.factors.extend(b.factors);
        a
    }

    pub fn scaled(mut self, c: &Rational) -> Term {
        self.coeff *= c;
        self
    }
}

impl TensorExpr {
    pub fn push(&mut self, t: Term) {
        if !t.coeff.is_zero() {
            self.terms.push(t);
        }
    }

    pub fn extend(&mut self, other: TensorExpr) {
        self.dim = self.dim.join(other.dim);
        for t in other.terms {
            self.push(t);
        }
    }

    pub fn scale(&self, c: &Rational) -> TensorExpr {
        if c.is_zero() {
            return TensorExpr::zero().with_dim(self.dim);
        }
        TensorExpr {
            terms: self.terms.iter().map(|t| t.clone().scaled(c)).collect(),
            dim: self.dim,
        }
    }

    /// Multiply every term by a parameter symbol.
    pub fn times_param(&self, p: &Sym) -> TensorExpr {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.params.push(p.clone());
            t.params.sort();
        }
        out
    }

    pub fn mul_with(&self, other: &TensorExpr, fresh: &mut Fresh) -> TensorExpr {
        let mut out = TensorExpr::zero().with_dim(self.dim.join(other.dim));
        if self.is_zero() || other.is_zero() {
            return out;
        }
        fresh.reserve(self.all_names().iter());
        fresh.reserve(other.all_names().iter());
        for a in &self.terms {
            for b in &other.terms {
                out.push(a.mul(b, fresh));
            }
        }
        out
    }

    /// Product of several expressions.
    pub fn product(parts: &[TensorExpr], fresh: &mut Fresh) -> TensorExpr {
        let mut acc = TensorExpr::one();
        for p in parts {
            acc = acc.mul_with(p, fresh);
        }
        acc
    }
}

impl Add for TensorExpr {
    type Output = TensorExpr;
    fn add(mut self, rhs: TensorExpr) -> TensorExpr {
        self.extend(rhs);
        self
    }
}

impl Neg for TensorExpr {
    type Output = TensorExpr;
    fn neg(mut self) -> TensorExpr {
        for t in &mut self.terms {
            t.coeff = -t.coeff.clone();
        }
        self
    }
}

impl Sub for TensorExpr {
    type Output = TensorExpr;
    fn sub(self, rhs: TensorExpr) -> TensorExpr {
        self + (-rhs)
    }
}

impl Mul for &TensorExpr {
    type Output = TensorExpr;
    fn mul(self, rhs: &TensorExpr) -> TensorExpr {
        let mut fresh = Fresh::new();
        self.mul_with(rhs, &mut fresh)
    }
}
