//! Tensor expression data model.
//!
//! A [`TensorExpr`] is a finite sum of [`Term`]s. Each term is an exact
//! rational coefficient times a multiset of scalar parameters times a
//! product of [`Factor`]s. Index names that occur twice inside a term are
//! summed over (dummies); names that occur once are free.

mod fresh;
mod index;
pub mod json;
mod ops;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};

pub use fresh::Fresh;
pub use index::{Index, Sym, Variance};

use crate::error::{Error, Result};

/// Exact rational coefficient type used everywhere.
pub type Rational = num_rational::BigRational;

/// Parameter symbol standing for the spacetime dimension.
pub const DIM_PARAM: &str = "D";

/// Build a rational from a numerator and denominator.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Spacetime dimension: symbolic `D` or a fixed positive integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Dim {
    #[default]
    Symbolic,
    Fixed(u32),
}

/// One tensor factor: a head symbol with partial derivatives applied.
///
/// `derivs` lists derivative indices outermost first; after
/// canonicalization the order is normalized.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor {
    pub head: Sym,
    pub derivs: Vec<Index>,
    pub slots: Vec<Index>,
}

impl Factor {
    pub fn new(head: impl Into<Sym>, slots: Vec<Index>) -> Self {
        Factor { head: head.into(), derivs: Vec::new(), slots }
    }

    pub fn with_derivs(mut self, derivs: Vec<Index>) -> Self {
        self.derivs = derivs;
        self
    }

    pub fn eta(a: Index, b: Index) -> Self {
        Factor::new("eta", vec![a, b])
    }

    pub fn delta(a: Index, b: Index) -> Self {
        Factor::new("delta", vec![a, b])
    }

    /// Every index occurrence of the factor, derivatives first.
    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.derivs.iter().chain(self.slots.iter())
    }

    pub fn indices_mut(&mut self) -> impl Iterator<Item = &mut Index> {
        self.derivs.iter_mut().chain(self.slots.iter_mut())
    }
}

/// A monomial: `coeff * params * factors`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: Rational,
    /// Sorted multiset of scalar parameter symbols.
    pub params: Vec<Sym>,
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn new(coeff: Rational, factors: Vec<Factor>) -> Self {
        Term { coeff, params: Vec::new(), factors }
    }

    pub fn scalar(coeff: Rational) -> Self {
        Term::new(coeff, Vec::new())
    }

    pub fn with_params(mut self, mut params: Vec<Sym>) -> Self {
        params.sort();
        self.params = params;
        self
    }

    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.factors.iter().flat_map(|f| f.indices())
    }

    /// Occurrence count per index name.
    pub fn name_counts(&self) -> BTreeMap<&Sym, usize> {
        let mut counts = BTreeMap::new();
        for i in self.indices() {
            *counts.entry(&i.name).or_insert(0) += 1;
        }
        counts
    }

    /// Free indices (occurring once), sorted by name.
    pub fn free_indices(&self) -> Vec<Index> {
        let counts = self.name_counts();
        let mut out: Vec<Index> = self
            .indices()
            .filter(|i| counts[&i.name] == 1)
            .cloned()
            .collect();
        out.sort();
        out
    }

    pub fn dummy_names(&self) -> BTreeSet<Sym> {
        self.name_counts()
            .into_iter()
            .filter(|(_, c)| *c == 2)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn all_names(&self) -> BTreeSet<Sym> {
        self.indices().map(|i| i.name.clone()).collect()
    }

    /// Check the pairing invariant: each name occurs once, or twice with
    /// opposite variance.
    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeMap<&Sym, Vec<Variance>> = BTreeMap::new();
        for i in self.indices() {
            seen.entry(&i.name).or_default().push(i.var);
        }
        for (name, vars) in seen {
            match vars.as_slice() {
                [_] => {}
                [a, b] if a != b => {}
                [_, _] => {
                    return Err(Error::Validation {
                        index: name.to_string(),
                        reason: "dummy pair with equal variance".into(),
                    })
                }
                _ => {
                    return Err(Error::Validation {
                        index: name.to_string(),
                        reason: format!("occurs {} times", vars.len()),
                    })
                }
            }
        }
        Ok(())
    }

    /// Rename indices by name, keeping variance.
    pub fn rename(&mut self, map: &BTreeMap<Sym, Sym>) {
        for f in &mut self.factors {
            for i in f.indices_mut() {
                if let Some(n) = map.get(&i.name) {
                    i.name = n.clone();
                }
            }
        }
    }

    pub fn has_param(&self, p: &str) -> bool {
        self.params.iter().any(|q| q.as_str() == p)
    }
}

/// A finite sum of terms with a dimension marker.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TensorExpr {
    pub terms: Vec<Term>,
    pub dim: Dim,
}

impl TensorExpr {
    pub fn zero() -> Self {
        TensorExpr::default()
    }

    pub fn one() -> Self {
        TensorExpr::from_term(Term::scalar(Rational::one()))
    }

    pub fn from_term(t: Term) -> Self {
        TensorExpr { terms: vec![t], dim: Dim::Symbolic }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        TensorExpr { terms, dim: Dim::Symbolic }
    }

    pub fn from_factor(f: Factor) -> Self {
        TensorExpr::from_term(Term::new(Rational::one(), vec![f]))
    }

    pub fn constant(c: Rational) -> Self {
        if c.is_zero() {
            TensorExpr::zero()
        } else {
            TensorExpr::from_term(Term::scalar(c))
        }
    }

    pub fn param(p: impl Into<Sym>) -> Self {
        TensorExpr::from_term(Term::scalar(Rational::one()).with_params(vec![p.into()]))
    }

    pub fn with_dim(mut self, dim: Dim) -> Self {
        self.dim = dim;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Free indices of the expression (taken from the first term).
    pub fn free_indices(&self) -> Vec<Index> {
        self.terms.first().map(|t| t.free_indices()).unwrap_or_default()
    }

    /// Validate every term and check all terms share one free-index set.
    pub fn validate(&self) -> Result<()> {
        let mut free: Option<Vec<Index>> = None;
        for t in &self.terms {
            t.validate()?;
            let f = t.free_indices();
            match &free {
                None => free = Some(f),
                Some(prev) if *prev != f => {
                    let bad = f
                        .iter()
                        .find(|i| !prev.contains(i))
                        .or_else(|| prev.iter().find(|i| !f.contains(i)))
                        .map(|i| i.to_string())
                        .unwrap_or_default();
                    return Err(Error::Validation {
                        index: bad,
                        reason: "free index sets differ between terms".into(),
                    });
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn all_names(&self) -> BTreeSet<Sym> {
        self.terms.iter().flat_map(|t| t.all_names()).collect()
    }

    pub fn heads(&self) -> BTreeSet<Sym> {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.head.clone()))
            .collect()
    }

    pub fn contains_head(&self, head: &str) -> bool {
        self.terms
            .iter()
            .any(|t| t.factors.iter().any(|f| f.head.as_str() == head))
    }

    /// Rename free indices (or any index) by name throughout.
    pub fn rename(&self, map: &BTreeMap<Sym, Sym>) -> TensorExpr {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.rename(map);
        }
        out
    }

    /// Substitute numeric values for parameters. `D` is handled by the
    /// dimension marker and is not touched here unless listed.
    pub fn substitute_params(&self, values: &BTreeMap<Sym, Rational>) -> TensorExpr {
        let mut out = TensorExpr { terms: Vec::new(), dim: self.dim };
        for t in &self.terms {
            let mut t = t.clone();
            let mut keep = Vec::with_capacity(t.params.len());
            for p in t.params.drain(..) {
                match values.get(&p) {
                    Some(v) => t.coeff *= v,
                    None => keep.push(p),
                }
            }
            t.params = keep;
            if !t.coeff.is_zero() {
                out.terms.push(t);
            }
        }
        out
    }

    /// Fix the dimension; symbolic `D` parameters become the integer.
    pub fn fix_dim(&self, n: u32) -> TensorExpr {
        let mut vals = BTreeMap::new();
        vals.insert(Sym::from(DIM_PARAM), Rational::from_integer(n.into()));
        let mut out = self.substitute_params(&vals);
        out.dim = Dim::Fixed(n);
        out
    }

    /// Split off the part of each term proportional to the given parameter
    /// monomial (exactly), with that monomial removed.
    pub fn coefficient_of(&self, params: &[Sym]) -> TensorExpr {
        let mut want: Vec<Sym> = params.to_vec();
        want.sort();
        let terms = self
            .terms
            .iter()
            .filter(|t| t.params.iter().filter(|p| p.as_str() != DIM_PARAM).cloned().collect::<Vec<_>>() == want)
            .map(|t| {
                let mut t = t.clone();
                t.params.retain(|p| p.as_str() == DIM_PARAM);
                t
            })
            .collect();
        TensorExpr { terms, dim: self.dim }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dim::Symbolic => write!(f, "D"),
            Dim::Fixed(n) => write!(f, "{n}"),
        }
    }
}
