//! Exact numeric evaluation of expressions on a field configuration.
//!
//! Each factor kind becomes a dense table over its index values with the
//! signature signs of upper indices folded in. A term is then a plain sum
//! over dummy assignments. Integer tables take an `i128` path; overflow or
//! non-integral data falls back to exact rationals.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{Dim, Factor, Rational, Sym, Term, TensorExpr, Variance};
use crate::registry::{DELTA, ETA};

use super::config::{flat_index, FieldConfig, N};

/// Signature diag(+1, -1, -1, -1).
pub fn eta_diag(i: usize) -> i64 {
    if i == 0 {
        1
    } else {
        -1
    }
}

/// Largest number of indices on one factor the dense tables accept.
const MAX_TABLE_INDICES: usize = 8;

type TableKey = (Sym, Vec<Variance>, Vec<Variance>);

struct Table {
    rat: Vec<Rational>,
    int: Option<Vec<i128>>,
}

/// Evaluator bound to one configuration and one point; tables are shared
/// across every expression evaluated with it.
pub struct PointEvaluator<'c> {
    cfg: &'c FieldConfig,
    point: [Rational; N],
    tables: HashMap<TableKey, Table>,
}

enum Slot {
    Fixed(usize),
    Var(usize),
}

impl<'c> PointEvaluator<'c> {
    pub fn new(cfg: &'c FieldConfig, point: [Rational; N]) -> Self {
        PointEvaluator { cfg, point, tables: HashMap::new() }
    }

    fn table(&mut self, f: &Factor) -> Result<&Table> {
        let key: TableKey = (
            f.head.clone(),
            f.derivs.iter().map(|i| i.var).collect(),
            f.slots.iter().map(|i| i.var).collect(),
        );
        if !self.tables.contains_key(&key) {
            let t = self.build_table(f)?;
            self.tables.insert(key.clone(), t);
        }
        Ok(&self.tables[&key])
    }

    fn build_table(&self, f: &Factor) -> Result<Table> {
        let nd = f.derivs.len();
        let n = nd + f.slots.len();
        if n > MAX_TABLE_INDICES {
            return Err(Error::Unsupported(format!("oracle factor `{}` with {n} indices", f.head)));
        }
        let vars: Vec<Variance> = f.derivs.iter().chain(f.slots.iter()).map(|i| i.var).collect();
        let head = f.head.as_str();
        let is_const = head == ETA || head == DELTA;
        let comps = if is_const {
            None
        } else {
            let (shape, comps) = self
                .cfg
                .fields
                .get(head)
                .ok_or_else(|| Error::UnknownSymbol(format!("{head} (no oracle configuration)")))?;
            if shape.rank != f.slots.len() {
                return Err(Error::Arity { name: head.into(), expected: shape.rank, found: f.slots.len() });
            }
            Some(comps)
        };
        let size = N.pow(n as u32);
        let mut rat = Vec::with_capacity(size);
        // derivatives commute: one polynomial evaluation per multiset
        let mut jets: HashMap<([u8; N], usize), Rational> = HashMap::new();
        let mut vals = vec![0usize; n];
        for flat in 0..size {
            let mut r = flat;
            for k in (0..n).rev() {
                vals[k] = r % N;
                r /= N;
            }
            let v = match comps {
                None => {
                    let (i, j) = (vals[0], vals[1]);
                    if i != j {
                        Rational::zero()
                    } else if head == DELTA {
                        Rational::one()
                    } else {
                        Rational::from_integer(eta_diag(i).into())
                    }
                }
                Some(comps) => {
                    let mut k = [0u8; N];
                    for &d in &vals[..nd] {
                        k[d] += 1;
                    }
                    let mut sign = 1i64;
                    for (idx, var) in vals.iter().zip(vars.iter()) {
                        if *var == Variance::Up {
                            sign *= eta_diag(*idx);
                        }
                    }
                    let c = flat_index(&vals[nd..]);
                    let v = jets.entry((k, c)).or_insert_with(|| comps[c].derivative_at(k, &self.point)).clone();
                    if sign < 0 {
                        -v
                    } else {
                        v
                    }
                }
            };
            rat.push(v);
        }
        let int = rat
            .iter()
            .map(|q| if q.denom().is_one() { q.numer().to_i128() } else { None })
            .collect::<Option<Vec<i128>>>();
        Ok(Table { rat, int })
    }

    /// Value of one term with free indices bound.
    fn term_value(&mut self, t: &Term, free: &BTreeMap<Sym, usize>, params: &BTreeMap<Sym, Rational>) -> Result<Rational> {
        let mut coeff = t.coeff.clone();
        for p in &t.params {
            let v = params
                .get(p)
                .ok_or_else(|| Error::Usage(format!("parameter `{p}` has no value for evaluation")))?;
            coeff *= v;
        }
        if coeff.is_zero() {
            return Ok(coeff);
        }
        let counts = t.name_counts();
        let mut var_id: BTreeMap<Sym, usize> = BTreeMap::new();
        for (n, c) in &counts {
            if *c == 2 {
                let k = var_id.len();
                var_id.insert((*n).clone(), k);
            } else if !free.contains_key(*n) {
                return Err(Error::Usage(format!("free index `{n}` has no value")));
            }
        }
        let nvars = var_id.len();
        if nvars > 12 {
            return Err(Error::Unsupported(format!("oracle term with {nvars} dummy pairs")));
        }
        let mut plan: Vec<(TableKey, Vec<Slot>)> = Vec::with_capacity(t.factors.len());
        for f in &t.factors {
            self.table(f)?;
            let key: TableKey =
                (f.head.clone(), f.derivs.iter().map(|i| i.var).collect(), f.slots.iter().map(|i| i.var).collect());
            let slots = f
                .indices()
                .map(|i| match var_id.get(&i.name) {
                    Some(&k) => Slot::Var(k),
                    None => Slot::Fixed(free[&i.name]),
                })
                .collect();
            plan.push((key, slots));
        }
        let tables: Vec<(&Table, &Vec<Slot>)> = plan.iter().map(|(k, s)| (&self.tables[k], s)).collect();
        let all_int = tables.iter().all(|(t, _)| t.int.is_some());
        let total = N.pow(nvars as u32);
        let mut assign = vec![0usize; nvars];
        let offset = |slots: &Vec<Slot>, assign: &[usize]| -> usize {
            slots.iter().fold(0, |acc, s| {
                acc * N
                    + match s {
                        Slot::Fixed(v) => *v,
                        Slot::Var(k) => assign[*k],
                    }
            })
        };
        if all_int {
            let mut sum: i128 = 0;
            let mut ok = true;
            'outer: for a in 0..total {
                let mut r = a;
                for k in 0..nvars {
                    assign[k] = r % N;
                    r /= N;
                }
                let mut prod: i128 = 1;
                for (tab, slots) in &tables {
                    let v = tab.int.as_ref().unwrap()[offset(slots, &assign)];
                    if v == 0 {
                        continue 'outer;
                    }
                    match prod.checked_mul(v) {
                        Some(p) => prod = p,
                        None => {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
                match sum.checked_add(prod) {
                    Some(s) => sum = s,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(coeff * Rational::from_integer(sum.into()));
            }
        }
        let mut sum = Rational::zero();
        'outer2: for a in 0..total {
            let mut r = a;
            for k in 0..nvars {
                assign[k] = r % N;
                r /= N;
            }
            let mut prod = Rational::one();
            for (tab, slots) in &tables {
                let v = &tab.rat[offset(slots, &assign)];
                if v.is_zero() {
                    continue 'outer2;
                }
                prod *= v;
            }
            sum += prod;
        }
        Ok(coeff * sum)
    }

    /// Exact value of `e` with the free indices bound to component values.
    pub fn evaluate(&mut self, e: &TensorExpr, free: &BTreeMap<Sym, usize>, params: &BTreeMap<Sym, Rational>) -> Result<Rational> {
        match e.dim {
            Dim::Symbolic => {
                if !e.is_zero() {
                    return Err(Error::DimNotFixed);
                }
            }
            Dim::Fixed(4) => {}
            Dim::Fixed(n) => return Err(Error::Usage(format!("the oracle works in 4 dimensions, not {n}"))),
        }
        if free.values().any(|&v| v >= N) {
            return Err(Error::Usage("free index values must lie in 0..4".into()));
        }
        let mut acc = Rational::zero();
        for t in &e.terms {
            acc += self.term_value(t, free, params)?;
        }
        Ok(acc)
    }
}

/// Exact value of `e` at one configuration and point.
pub fn evaluate(e: &TensorExpr, cfg: &FieldConfig, point: &[Rational; N], free: &BTreeMap<Sym, usize>) -> Result<Rational> {
    PointEvaluator::new(cfg, point.clone()).evaluate(e, free, &BTreeMap::new())
}

/// Integer helper for reports: the value as `p/q` text.
pub fn rational_text(q: &Rational) -> String {
    let g = q.numer().gcd(q.denom());
    let (n, d) = (q.numer() / &g, q.denom() / &g);
    if d.is_one() {
        n.to_string()
    } else {
        format!("{n}/{d}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonicalize;
    use crate::dsl::parse;
    use crate::expr::{rat, Index};
    use crate::registry::Symmetry;
    use crate::verify::config::{FieldShape, Poly};

    fn origin() -> [Rational; N] {
        std::array::from_fn(|_| Rational::zero())
    }

    #[test]
    fn eta_trace_is_four() {
        let e = TensorExpr::from_term(Term::new(
            rat(1, 1),
            vec![Factor::eta(Index::lo("m"), Index::lo("n")), Factor::eta(Index::up("m"), Index::up("n"))],
        ))
        .with_dim(Dim::Fixed(4));
        let cfg = FieldConfig::zero(&[]);
        assert_eq!(evaluate(&e, &cfg, &origin(), &BTreeMap::new()).unwrap(), rat(4, 1));
        let sym = e.clone().with_dim(Dim::Symbolic);
        assert_eq!(evaluate(&sym, &cfg, &origin(), &BTreeMap::new()), Err(Error::DimNotFixed));
    }

    #[test]
    fn scalar_curvature_on_simple_configuration() {
        let p = parse(
            "field h {rank:2, symmetry:symmetric}
             lagrangian = d[m] d[n] h[^m,^n] - d[m] d[^m] h[n,^n]",
        )
        .unwrap();
        let r = p.lagrangian_expr().unwrap().fix_dim(4);
        let shapes = vec![(Sym::from("h"), FieldShape { rank: 2, sym: Symmetry::Symmetric })];
        let mut cfg = FieldConfig::zero(&shapes);
        cfg.set("h", &[0, 0], Poly::monomial(rat(1, 1), [0, 2, 0, 0])).unwrap();
        for x in [origin(), std::array::from_fn(|i| rat(i as i64 - 1, 3))] {
            assert_eq!(evaluate(&r, &cfg, &x, &BTreeMap::new()).unwrap(), rat(2, 1));
        }
        let c = canonicalize(&r, &p.registry()).unwrap();
        assert_eq!(evaluate(&c, &cfg, &origin(), &BTreeMap::new()).unwrap(), rat(2, 1));
    }

    #[test]
    fn free_indices_must_be_bound() {
        let e = TensorExpr::from_factor(Factor::new("phi", vec![]).with_derivs(vec![Index::lo("a")])).with_dim(Dim::Fixed(4));
        let cfg = FieldConfig::zero(&[(Sym::from("phi"), FieldShape { rank: 0, sym: Symmetry::None })]);
        assert!(matches!(evaluate(&e, &cfg, &origin(), &BTreeMap::new()), Err(Error::Usage(_))));
    }
}
