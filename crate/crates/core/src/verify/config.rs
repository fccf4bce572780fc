//! Random polynomial field configurations.

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Rational, Sym};
use crate::registry::{FieldKind, Registry, Symmetry};

/// Number of spacetime components.
pub const N: usize = 4;

/// Polynomial in the four coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    pub terms: Vec<([u8; N], Rational)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn monomial(c: Rational, exps: [u8; N]) -> Self {
        Poly { terms: vec![(exps, c)] }
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect() }
    }

    /// Value of `d^k P` at `x`, where `k[i]` counts derivatives along axis `i`.
    pub fn derivative_at(&self, k: [u8; N], x: &[Rational; N]) -> Rational {
        self.derivative_at_int(k, x)
            .map(|v| Rational::from_integer(v.into()))
            .unwrap_or_else(|| self.derivative_at_rat(k, x))
    }

    /// Machine-integer path; `None` on non-integral data or overflow.
    fn derivative_at_int(&self, k: [u8; N], x: &[Rational; N]) -> Option<i128> {
        let xi: Vec<i128> = x.iter().map(|q| if q.is_integer() { q.numer().to_i128() } else { None }).collect::<Option<_>>()?;
        let mut acc: i128 = 0;
        'mono: for (e, c) in &self.terms {
            if !c.is_integer() {
                return None;
            }
            let mut v = c.numer().to_i128()?;
            for i in 0..N {
                if e[i] < k[i] {
                    continue 'mono;
                }
                for j in 0..k[i] {
                    v = v.checked_mul((e[i] - j) as i128)?;
                }
                for _ in 0..(e[i] - k[i]) {
                    v = v.checked_mul(xi[i])?;
                }
            }
            acc = acc.checked_add(v)?;
        }
        Some(acc)
    }

    fn derivative_at_rat(&self, k: [u8; N], x: &[Rational; N]) -> Rational {
        let mut acc = Rational::zero();
        'mono: for (e, c) in &self.terms {
            let mut v = c.clone();
            for i in 0..N {
                if e[i] < k[i] {
                    continue 'mono;
                }
                for j in 0..k[i] {
                    v *= Rational::from_integer(((e[i] - j) as i64).into());
                }
                for _ in 0..(e[i] - k[i]) {
                    v *= &x[i];
                }
            }
            acc += v;
        }
        acc
    }
}

/// Declared shape of one configured field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldShape {
    pub rank: usize,
    pub sym: Symmetry,
}

/// Components of every configured field as polynomials, lower-index
/// components, flattened base 4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldConfig {
    pub seed: u64,
    pub degree: u32,
    pub fields: BTreeMap<Sym, (FieldShape, Vec<Poly>)>,
}

/// Canonical representative of a component and the sign relating them.
fn representative(comp: &[usize], sym: Symmetry) -> (Vec<usize>, i32) {
    let mut v = comp.to_vec();
    match sym {
        Symmetry::None => (v, 1),
        Symmetry::Symmetric => {
            v.sort_unstable();
            (v, 1)
        }
        Symmetry::Antisymmetric => {
            let mut sign = 1;
            for i in 0..v.len() {
                for j in 0..v.len() - 1 - i {
                    if v[j] > v[j + 1] {
                        v.swap(j, j + 1);
                        sign = -sign;
                    }
                }
            }
            if v.windows(2).any(|w| w[0] == w[1]) {
                sign = 0;
            }
            (v, sign)
        }
    }
}

pub fn flat_index(comp: &[usize]) -> usize {
    comp.iter().fold(0, |acc, &c| acc * N + c)
}

fn components(rank: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..rank {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..N).map(move |i| {
                    let mut w = v.clone();
                    w.push(i);
                    w
                })
            })
            .collect();
    }
    out
}

fn monomials(degree: u32) -> Vec<[u8; N]> {
    let mut out = Vec::new();
    let d = degree as u8;
    for a in 0..=d {
        for b in 0..=d - a {
            for c in 0..=d - a - b {
                for e in 0..=d - a - b - c {
                    out.push([a, b, c, e]);
                }
            }
        }
    }
    out
}

/// Fields the oracle needs values for: everything declared except the
/// built-in and metric heads.
pub fn configurable_fields(reg: &Registry) -> Vec<(Sym, FieldShape)> {
    reg.heads()
        .filter(|(_, h)| !matches!(h.kind, FieldKind::Builtin | FieldKind::Metric))
        .map(|(n, h)| (n.clone(), FieldShape { rank: h.rank, sym: if h.sym.from == 0 { h.sym.sym } else { Symmetry::None } }))
        .collect()
}

impl FieldConfig {
    /// All components zero.
    pub fn zero(fields: &[(Sym, FieldShape)]) -> Self {
        let fields = fields
            .iter()
            .map(|(n, s)| (n.clone(), (s.clone(), vec![Poly::zero(); N.pow(s.rank as u32)])))
            .collect();
        FieldConfig { seed: 0, degree: 0, fields }
    }

    /// Set one component and its images under the declared symmetry.
    pub fn set(&mut self, field: &str, comp: &[usize], p: Poly) -> Result<()> {
        let (shape, comps) = self.fields.get_mut(field).ok_or_else(|| Error::UnknownSymbol(field.into()))?;
        if comp.len() != shape.rank {
            return Err(Error::Arity { name: field.into(), expected: shape.rank, found: comp.len() });
        }
        let (rep, _) = representative(comp, shape.sym);
        for c in components(shape.rank) {
            let (r, s) = representative(&c, shape.sym);
            if r == rep {
                comps[flat_index(&c)] = match s {
                    1 => p.clone(),
                    -1 => p.neg(),
                    _ => Poly::zero(),
                };
            }
        }
        Ok(())
    }

    pub fn component(&self, field: &str, comp: &[usize]) -> Option<&Poly> {
        self.fields.get(field).map(|(_, c)| &c[flat_index(comp)])
    }
}

/// Deterministic random configuration. Coefficients are small integers, so
/// values at integer points are integers; the evaluator still works over
/// the rationals. `max_jet_order` is the highest derivative order the
/// theory uses; lower degrees would make those jets trivially zero.
pub fn sample_config(seed: u64, degree: u32, fields: &[(Sym, FieldShape)], max_jet_order: u32) -> Result<FieldConfig> {
    if degree < 2 || degree < max_jet_order {
        return Err(Error::Usage(format!(
            "polynomial degree {degree} is too small: need at least {}",
            max_jet_order.max(2)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let monos = monomials(degree);
    let mut cfg = FieldConfig::zero(fields);
    let mut names: Vec<&Sym> = cfg.fields.keys().collect();
    names.sort();
    let names: Vec<Sym> = names.into_iter().cloned().collect();
    for name in names {
        let (shape, comps) = cfg.fields.get_mut(&name).unwrap();
        let mut reps: BTreeMap<Vec<usize>, Poly> = BTreeMap::new();
        for c in components(shape.rank) {
            let (r, s) = representative(&c, shape.sym);
            if s == 0 {
                continue;
            }
            let p = reps.entry(r).or_insert_with(|| {
                let terms = monos
                    .iter()
                    .filter_map(|e| {
                        let v: i64 = rng.gen_range(-3..=3);
                        (v != 0).then(|| (*e, Rational::from_integer(v.into())))
                    })
                    .collect();
                Poly { terms }
            });
            comps[flat_index(&c)] = if s == 1 { p.clone() } else { p.neg() };
        }
    }
    cfg.seed = seed;
    cfg.degree = degree;
    Ok(cfg)
}

/// Deterministic random integer point.
pub fn sample_point(rng: &mut impl Rng) -> [Rational; N] {
    std::array::from_fn(|_| Rational::from_integer(rng.gen_range(-3i64..=3).into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h_shape() -> Vec<(Sym, FieldShape)> {
        vec![(Sym::from("h"), FieldShape { rank: 2, sym: Symmetry::Symmetric })]
    }

    #[test]
    fn deterministic_and_symmetric() {
        let a = sample_config(7, 3, &h_shape(), 2).unwrap();
        let b = sample_config(7, 3, &h_shape(), 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.component("h", &[0, 1]), a.component("h", &[1, 0]));
        assert_ne!(a, sample_config(8, 3, &h_shape(), 2).unwrap());
    }

    #[test]
    fn degree_precondition() {
        assert!(sample_config(1, 1, &h_shape(), 2).is_err());
        assert!(sample_config(1, 2, &h_shape(), 2).is_ok());
    }

    #[test]
    fn antisymmetric_components() {
        let f = vec![(Sym::from("F"), FieldShape { rank: 2, sym: Symmetry::Antisymmetric })];
        let c = sample_config(3, 2, &f, 0).unwrap();
        assert_eq!(c.component("F", &[2, 1]).unwrap(), &c.component("F", &[1, 2]).unwrap().neg());
        assert!(c.component("F", &[3, 3]).unwrap().terms.is_empty());
    }

    #[test]
    fn polynomial_derivatives() {
        // p = 2 x0^2 x1
        let p = Poly::monomial(Rational::from_integer(2.into()), [2, 1, 0, 0]);
        let x: [Rational; N] = std::array::from_fn(|i| Rational::from_integer(((i + 1) as i64).into()));
        assert_eq!(p.derivative_at([0; 4], &x), Rational::from_integer(4.into()));
        assert_eq!(p.derivative_at([1, 0, 0, 0], &x), Rational::from_integer(8.into()));
        assert_eq!(p.derivative_at([2, 1, 0, 0], &x), Rational::from_integer(4.into()));
        assert!(p.derivative_at([3, 0, 0, 0], &x).is_zero());
    }
}
