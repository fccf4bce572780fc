//! Canonicalization: metric contractions, derivative and slot ordering,
//! dummy relabeling and merging of like terms.
//!
//! A term is brought to canonical form in three steps.
//!
//! 1. Contraction. In a flat term (no `g`, `ginv`, `sqrtg`, `Gamma`) every
//!    `eta` or `delta` sharing a dummy with another factor is absorbed into
//!    it by renaming; traces give `D` (or `n` at fixed dimension). In a curved
//!    term `delta` still absorbs into anything, `eta` only into `eta`/`delta`,
//!    and `g_{ab} ginv^{bc}` becomes `delta_a^c`.
//! 2. Labeling. Factors are emitted one at a time; at each step the
//!    candidate (factor, derivative order, slot order) with the smallest code
//!    is taken, ties are all followed. Dummies get labels by first
//!    appearance. The result is the lexicographic minimum over every valid
//!    presentation of the term, so it is independent of input naming and
//!    order. Two minimal presentations with opposite sign mean the term is 0.
//! 3. Merge. Terms with equal (params, factors) are summed.
//!
//! In flat terms dummy variance carries no information and is normalized to
//! lower-then-upper in emission order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{Dim, Factor, Index, Rational, Sym, Term, TensorExpr, Variance, DIM_PARAM};
use crate::registry::{is_metric_head, Registry, SlotSymmetry, Symmetry, DELTA, ETA, G, GINV};

/// Terms above this count are canonicalized in parallel.
const PAR_THRESHOLD: usize = 48;

/// Preferred canonical dummy names, in order.
const NAME_POOL: &[&str] = &[
    "a", "b", "c", "e", "f", "i", "j", "k", "l", "m", "n", "p", "q", "r", "s", "t", "u", "v", "w",
    "x", "y", "z",
];

/// Canonical form of an expression.
pub fn canonicalize(e: &TensorExpr, reg: &Registry) -> Result<TensorExpr> {
    e.validate()?;
    let dim = e.dim;
    let canon: Vec<Option<Term>> = if e.terms.len() > PAR_THRESHOLD {
        e.terms
            .par_iter()
            .map(|t| canonicalize_term(t, reg, dim))
            .collect::<Result<_>>()?
    } else {
        e.terms
            .iter()
            .map(|t| canonicalize_term(t, reg, dim))
            .collect::<Result<_>>()?
    };
    Ok(merge(canon.into_iter().flatten(), dim))
}

/// Sum terms already in canonical form.
pub fn merge(terms: impl IntoIterator<Item = Term>, dim: Dim) -> TensorExpr {
    let mut acc: BTreeMap<(Vec<Sym>, Vec<Factor>), Rational> = BTreeMap::new();
    for t in terms {
        let slot = acc.entry((t.params, t.factors)).or_insert_with(Rational::zero);
        *slot += t.coeff;
    }
    let terms = acc
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((params, factors), coeff)| Term { coeff, params, factors })
        .collect();
    TensorExpr { terms, dim }
}

/// True iff `a - b` canonicalizes to zero. Free indices of `b` are renamed
/// to those of `a` by sorted position when the names differ.
pub fn equal(a: &TensorExpr, b: &TensorExpr, reg: &Registry) -> Result<bool> {
    let diff = difference(a, b, reg)?;
    Ok(diff.is_zero())
}

/// Canonical `a - b` after aligning the free indices of `b` to `a`.
pub fn difference(a: &TensorExpr, b: &TensorExpr, reg: &Registry) -> Result<TensorExpr> {
    let b = align_free_indices(a, b)?;
    let mut d = a.clone() - b;
    d.dim = a.dim.join(d.dim);
    canonicalize(&d, reg)
}

/// Rename the free indices of `b` to those of `a` by sorted position.
pub fn align_free_indices(a: &TensorExpr, b: &TensorExpr) -> Result<TensorExpr> {
    if a.is_zero() || b.is_zero() {
        return Ok(b.clone());
    }
    let fa = a.free_indices();
    let fb = b.free_indices();
    if fa.len() != fb.len() {
        return Err(Error::Usage(format!(
            "free index counts differ: {} vs {}",
            fa.len(),
            fb.len()
        )));
    }
    if fa == fb {
        return Ok(b.clone());
    }
    let mut map = BTreeMap::new();
    for (x, y) in fa.iter().zip(fb.iter()) {
        if x.var != y.var {
            return Err(Error::Usage(format!("free index variance mismatch: {x} vs {y}")));
        }
        map.insert(y.name.clone(), x.name.clone());
    }
    // Dummies of b that collide with the new free names are moved out of the way.
    let targets: BTreeSet<Sym> = fa.iter().map(|i| i.name.clone()).collect();
    let mut fresh = crate::expr::Fresh::avoiding(a.all_names().iter().chain(b.all_names().iter()));
    let mut out = b.clone();
    for t in &mut out.terms {
        t.freshen_dummies(&targets, &mut fresh);
        t.rename(&map);
    }
    Ok(out)
}

/// Flatten to monomials, dropping zero terms. The representation is always
/// a sum of products, so this only validates and cleans.
pub fn expand(e: &TensorExpr) -> Result<TensorExpr> {
    e.validate()?;
    let mut out = TensorExpr::zero().with_dim(e.dim);
    for t in &e.terms {
        out.push(t.clone());
    }
    Ok(out)
}

/// Canonical form of one term, or `None` when it vanishes.
pub fn canonicalize_term(t: &Term, reg: &Registry, dim: Dim) -> Result<Option<Term>> {
    t.validate()?;
    for f in &t.factors {
        if let Some(info) = reg.get(f.head.as_str()) {
            if info.rank != f.slots.len() {
                return Err(Error::Arity {
                    name: f.head.to_string(),
                    expected: info.rank,
                    found: f.slots.len(),
                });
            }
        }
    }
    if t.coeff.is_zero() {
        return Ok(None);
    }
    let mut t = t.clone();
    let mut traces = 0usize;
    if !contract(&mut t, &mut traces) {
        return Ok(None);
    }
    match dim {
        Dim::Fixed(n) => {
            for _ in 0..traces {
                t.coeff *= Rational::from_integer(n.into());
            }
            if t.coeff.is_zero() {
                return Ok(None);
            }
        }
        Dim::Symbolic => {
            for _ in 0..traces {
                t.params.push(Sym::from(DIM_PARAM));
            }
            t.params.sort();
        }
    }
    let flat = !is_curved(&t);
    Labeler::new(&t, reg, flat)?.run()
}

fn is_curved(t: &Term) -> bool {
    t.factors.iter().any(|f| is_metric_head(f.head.as_str()))
}

fn is_eta_like(f: &Factor) -> bool {
    f.head.as_str() == ETA || f.head.as_str() == DELTA
}

/// Choose `eta` or `delta` by slot variance.
fn normalize_metric_identity(f: &mut Factor) {
    if is_eta_like(f) && f.slots.len() == 2 {
        f.head = if f.slots[0].var == f.slots[1].var { Sym::from(ETA) } else { Sym::from(DELTA) };
    }
}

/// Apply contraction rules in place. Returns false if the term vanishes.
fn contract(t: &mut Term, traces: &mut usize) -> bool {
    for f in &mut t.factors {
        if is_eta_like(f) {
            if !f.derivs.is_empty() {
                return false;
            }
            normalize_metric_identity(f);
        }
    }
    loop {
        let curved = is_curved(t);
        let mut loc: HashMap<Sym, Vec<(usize, bool, usize)>> = HashMap::new();
        for (fi, f) in t.factors.iter().enumerate() {
            for (p, i) in f.derivs.iter().enumerate() {
                loc.entry(i.name.clone()).or_default().push((fi, true, p));
            }
            for (p, i) in f.slots.iter().enumerate() {
                loc.entry(i.name.clone()).or_default().push((fi, false, p));
            }
        }
        let mut changed = false;
        'outer: for fi in 0..t.factors.len() {
            let f = &t.factors[fi];
            if is_eta_like(f) {
                for s in 0..2 {
                    let occ = &loc[&f.slots[s].name];
                    if occ.len() != 2 {
                        continue;
                    }
                    let other = if occ[0] == (fi, false, s) { occ[1] } else { occ[0] };
                    if other.0 == fi {
                        // Trace.
                        t.factors.remove(fi);
                        *traces += 1;
                        changed = true;
                        break 'outer;
                    }
                    let partner = &t.factors[other.0];
                    let allowed = !curved || f.head.as_str() == DELTA || is_eta_like(partner);
                    if !allowed {
                        continue;
                    }
                    let keep = f.slots[1 - s].clone();
                    let (pj, is_d, pos) = other;
                    {
                        let pf = &mut t.factors[pj];
                        if is_d {
                            pf.derivs[pos] = keep;
                        } else {
                            pf.slots[pos] = keep;
                        }
                        normalize_metric_identity(pf);
                    }
                    t.factors.remove(fi);
                    changed = true;
                    break 'outer;
                }
            } else if f.head.as_str() == G && f.derivs.is_empty() && f.slots.len() == 2 {
                for s in 0..2 {
                    let occ = &loc[&f.slots[s].name];
                    if occ.len() != 2 {
                        continue;
                    }
                    let other = if occ[0] == (fi, false, s) { occ[1] } else { occ[0] };
                    let (pj, is_d, pos) = other;
                    let pf = &t.factors[pj];
                    if pj == fi || is_d || pf.head.as_str() != GINV || !pf.derivs.is_empty() {
                        continue;
                    }
                    let a = f.slots[1 - s].clone();
                    let c = pf.slots[1 - pos].clone();
                    let (hi, lo) = (fi.max(pj), fi.min(pj));
                    t.factors.remove(hi);
                    t.factors.remove(lo);
                    let mut d = Factor::delta(a, c);
                    normalize_metric_identity(&mut d);
                    t.factors.push(d);
                    changed = true;
                    break 'outer;
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

/// One index occurrence after preprocessing.
#[derive(Clone, Copy, Debug)]
enum Occ {
    Dummy { id: u32, var: Variance },
    Free { rank: u32, var: Variance },
}

struct Arrangement {
    derivs: Vec<u8>,
    slots: Vec<u8>,
    sign: i8,
}

struct FactorPrep {
    class: u64,
    head_rank: u64,
    color: u64,
    derivs: Vec<Occ>,
    slots: Vec<Occ>,
    /// Ordering key for new dummies, per occurrence (derivs then slots).
    partner_key: Vec<u64>,
    arrangements: Vec<Arrangement>,
}

#[derive(Clone)]
struct State {
    used: u128,
    labels: Vec<u32>,
    next: u32,
    sign: i8,
    choice: Vec<(u16, u16)>,
}

const NO_LABEL: u32 = u32::MAX;

struct Labeler<'a> {
    term: &'a Term,
    flat: bool,
    factors: Vec<FactorPrep>,
    n_dummies: usize,
    free_names: Vec<Sym>,
}

fn head_class(h: &str) -> u64 {
    if h == ETA || h == DELTA {
        0
    } else if is_metric_head(h) {
        2
    } else {
        1
    }
}

fn var_bit(v: Variance) -> u64 {
    match v {
        Variance::Lo => 0,
        Variance::Up => 1,
    }
}

fn mix(h: u64, x: u64) -> u64 {
    let mut z = h ^ x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_all(seed: u64, xs: &[u64]) -> u64 {
    xs.iter().fold(seed, |h, &x| mix(h, x))
}

/// All permutations of `0..n` with their parity sign.
pub(crate) fn permutations(n: usize) -> Vec<(Vec<u8>, i8)> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (0..n as u8).collect();
    fn rec(k: usize, cur: &mut Vec<u8>, sign: i8, out: &mut Vec<(Vec<u8>, i8)>) {
        if k == cur.len() {
            out.push((cur.clone(), sign));
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, if i == k { sign } else { -sign }, out);
            cur.swap(k, i);
        }
    }
    rec(0, &mut cur, 1, &mut out);
    out
}

pub(crate) fn slot_arrangements(ns: usize, sym: SlotSymmetry) -> Vec<(Vec<u8>, i8)> {
    if sym.sym == Symmetry::None || sym.from + 1 >= ns {
        return vec![((0..ns as u8).collect(), 1)];
    }
    let k = ns - sym.from;
    permutations(k)
        .into_iter()
        .map(|(p, s)| {
            let mut full: Vec<u8> = (0..sym.from as u8).collect();
            full.extend(p.iter().map(|&x| x + sym.from as u8));
            let sign = if sym.sym == Symmetry::Antisymmetric { s } else { 1 };
            (full, sign)
        })
        .collect()
}

impl<'a> Labeler<'a> {
    fn new(term: &'a Term, reg: &Registry, flat: bool) -> Result<Self> {
        if term.factors.len() > 128 {
            return Err(Error::Unsupported("more than 128 factors in one term".into()));
        }
        if term.factors.iter().any(|f| f.derivs.len() + f.slots.len() > 16) {
            return Err(Error::Unsupported("more than 16 indices on one factor".into()));
        }
        let counts = term.name_counts();
        let mut free_names: Vec<Sym> =
            counts.iter().filter(|(_, &c)| c == 1).map(|(n, _)| (*n).clone()).collect();
        free_names.sort();
        let free_rank: HashMap<&Sym, u32> =
            free_names.iter().enumerate().map(|(i, n)| (n, i as u32)).collect();
        let mut dummy_id: HashMap<&Sym, u32> = HashMap::new();
        let mut heads: Vec<(u64, &str)> =
            term.factors.iter().map(|f| (head_class(f.head.as_str()), f.head.as_str())).collect();
        heads.sort();
        heads.dedup();
        let head_rank = |f: &Factor| -> u64 {
            let key = (head_class(f.head.as_str()), f.head.as_str());
            heads.binary_search(&key).unwrap() as u64
        };

        let occ_of = |i: &'a Index, dummy_id: &mut HashMap<&'a Sym, u32>| -> Occ {
            if let Some(&r) = free_rank.get(&i.name) {
                Occ::Free { rank: r, var: i.var }
            } else {
                let n = dummy_id.len() as u32;
                let id = *dummy_id.entry(&i.name).or_insert(n);
                Occ::Dummy { id, var: i.var }
            }
        };

        let mut factors = Vec::with_capacity(term.factors.len());
        let mut syms = Vec::with_capacity(term.factors.len());
        for f in &term.factors {
            let derivs: Vec<Occ> = f.derivs.iter().map(|i| occ_of(i, &mut dummy_id)).collect();
            let slots: Vec<Occ> = f.slots.iter().map(|i| occ_of(i, &mut dummy_id)).collect();
            let mut sym = reg.symmetry(f.head.as_str());
            if f.head.as_str() == DELTA {
                sym = SlotSymmetry::whole(Symmetry::Symmetric);
            }
            syms.push(sym);
            let mut arrangements = Vec::new();
            let dperms = permutations(derivs.len());
            let sperms = slot_arrangements(slots.len(), sym);
            for (dp, _) in &dperms {
                for (sp, s) in &sperms {
                    arrangements.push(Arrangement { derivs: dp.clone(), slots: sp.clone(), sign: *s });
                }
            }
            factors.push(FactorPrep {
                class: head_class(f.head.as_str()),
                head_rank: head_rank(f),
                color: 0,
                derivs,
                slots,
                partner_key: Vec::new(),
                arrangements,
            });
        }
        let n_dummies = dummy_id.len();
        let mut lab = Labeler { term, flat, factors, n_dummies, free_names };
        lab.refine_colors(&syms);
        Ok(lab)
    }

    fn pos_class(sym: SlotSymmetry, is_deriv: bool, pos: usize) -> u64 {
        if is_deriv {
            0
        } else if sym.sym != Symmetry::None && pos >= sym.from {
            1000
        } else {
            1 + pos as u64
        }
    }

    fn vb(&self, v: Variance) -> u64 {
        if self.flat {
            0
        } else {
            var_bit(v)
        }
    }

    /// Relabeling-invariant colors of factors and of dummy partners.
    fn refine_colors(&mut self, syms: &[SlotSymmetry]) {
        // Location of every dummy occurrence: (factor, pos class).
        let mut where_: Vec<Vec<(usize, u64, usize)>> = vec![Vec::new(); self.n_dummies];
        for (fi, f) in self.factors.iter().enumerate() {
            for (p, o) in f.derivs.iter().chain(f.slots.iter()).enumerate() {
                if let Occ::Dummy { id, .. } = o {
                    let is_d = p < f.derivs.len();
                    let pos = if is_d { p } else { p - f.derivs.len() };
                    where_[*id as usize].push((fi, Self::pos_class(syms[fi], is_d, pos), p));
                }
            }
        }
        let mut colors: Vec<u64> = Vec::with_capacity(self.factors.len());
        for (fi, f) in self.factors.iter().enumerate() {
            let mut items: Vec<u64> = Vec::new();
            for (p, o) in f.derivs.iter().chain(f.slots.iter()).enumerate() {
                let is_d = p < f.derivs.len();
                let pos = if is_d { p } else { p - f.derivs.len() };
                let pc = Self::pos_class(syms[fi], is_d, pos);
                let v = match *o {
                    Occ::Free { rank, var } => mix_all(2, &[pc, rank as u64, var_bit(var)]),
                    Occ::Dummy { var, .. } => mix_all(1, &[pc, self.vb(var)]),
                };
                items.push(v);
            }
            items.sort_unstable();
            let base = mix_all(
                7,
                &[f.class, f.head_rank, f.derivs.len() as u64, f.slots.len() as u64],
            );
            colors.push(mix_all(base, &items));
        }
        for _round in 0..2 {
            let mut next = Vec::with_capacity(colors.len());
            for (fi, f) in self.factors.iter().enumerate() {
                let mut items: Vec<u64> = Vec::new();
                for (p, o) in f.derivs.iter().chain(f.slots.iter()).enumerate() {
                    if let Occ::Dummy { id, var } = *o {
                        let locs = &where_[id as usize];
                        let me = locs.iter().position(|&(g, _, q)| g == fi && q == p).unwrap();
                        let (mine_pc, (pf, ppc, _)) = (locs[me].1, locs[1 - me]);
                        items.push(mix_all(3, &[mine_pc, self.vb(var), colors[pf], ppc]));
                    }
                }
                items.sort_unstable();
                next.push(mix_all(colors[fi], &items));
            }
            colors = next;
        }
        let mut uniq = colors.clone();
        uniq.sort_unstable();
        uniq.dedup();
        let rank = |c: u64| uniq.binary_search(&c).unwrap() as u64;
        // Partner keys: (partner color rank, partner position class).
        let mut pkeys: Vec<Vec<(u64, u64)>> = Vec::with_capacity(self.factors.len());
        for (fi, f) in self.factors.iter().enumerate() {
            let mut v = Vec::new();
            for (p, o) in f.derivs.iter().chain(f.slots.iter()).enumerate() {
                match *o {
                    Occ::Dummy { id, .. } => {
                        let locs = &where_[id as usize];
                        let me = locs.iter().position(|&(g, _, q)| g == fi && q == p).unwrap();
                        let (pf, ppc, _) = locs[1 - me];
                        v.push((rank(colors[pf]), ppc));
                    }
                    Occ::Free { .. } => v.push((0, 0)),
                }
            }
            pkeys.push(v);
        }
        let mut all: Vec<(u64, u64)> = pkeys.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        for (fi, f) in self.factors.iter_mut().enumerate() {
            f.color = rank(colors[fi]);
            f.partner_key =
                pkeys[fi].iter().map(|k| all.binary_search(k).unwrap() as u64).collect();
        }
    }

    /// Write the code of placing factor `fi` with arrangement `ai` in state
    /// `st` into `buf`, stopping early once it exceeds `best`.
    fn code(&self, st: &State, fi: usize, ai: usize, buf: &mut Vec<u64>, best: Option<&[u64]>) -> Ordering {
        let f = &self.factors[fi];
        let arr = &f.arrangements[ai];
        buf.clear();
        let mut ord = Ordering::Equal;
        let push = |buf: &mut Vec<u64>, x: u64, ord: &mut Ordering| -> bool {
            buf.push(x);
            if *ord == Ordering::Equal {
                if let Some(b) = best {
                    let k = buf.len() - 1;
                    *ord = match b.get(k) {
                        Some(&y) => x.cmp(&y),
                        None => Ordering::Greater,
                    };
                    if *ord == Ordering::Greater {
                        return false;
                    }
                }
            }
            true
        };
        for x in [f.class, f.head_rank, f.derivs.len() as u64, f.slots.len() as u64, f.color] {
            if !push(buf, x, &mut ord) {
                return Ordering::Greater;
            }
        }
        let mut fresh_ids: [u32; 16] = [0; 16];
        let mut n_fresh = 0usize;
        let nd = f.derivs.len();
        let order = arr.derivs.iter().map(|&p| p as usize).chain(arr.slots.iter().map(|&p| nd + p as usize));
        for p in order {
            let o = if p < nd { f.derivs[p] } else { f.slots[p - nd] };
            let x = match o {
                Occ::Free { rank, var } => (2u64 << 60) | ((rank as u64) << 1) | var_bit(var),
                Occ::Dummy { id, var } => {
                    let l = st.labels[id as usize];
                    if l != NO_LABEL {
                        ((l as u64) << 1) | self.vb(var)
                    } else if let Some(k) = fresh_ids[..n_fresh].iter().position(|&d| d == id) {
                        (((st.next + k as u32) as u64) << 1) | self.vb(var)
                    } else {
                        if n_fresh < fresh_ids.len() {
                            fresh_ids[n_fresh] = id;
                        }
                        n_fresh += 1;
                        (1u64 << 60) | (f.partner_key[p] << 1) | self.vb(var)
                    }
                }
            };
            if !push(buf, x, &mut ord) {
                return Ordering::Greater;
            }
        }
        if ord == Ordering::Equal {
            if let Some(b) = best {
                if b.len() > buf.len() {
                    ord = Ordering::Less;
                }
            }
        }
        if best.is_none() {
            Ordering::Less
        } else {
            ord
        }
    }

    fn apply(&self, st: &State, fi: usize, ai: usize) -> State {
        let f = &self.factors[fi];
        let arr = &f.arrangements[ai];
        let mut s = st.clone();
        s.used |= 1u128 << fi;
        s.sign *= arr.sign;
        s.choice.push((fi as u16, ai as u16));
        let nd = f.derivs.len();
        let order = arr.derivs.iter().map(|&p| p as usize).chain(arr.slots.iter().map(|&p| nd + p as usize));
        for p in order {
            let o = if p < nd { f.derivs[p] } else { f.slots[p - nd] };
            if let Occ::Dummy { id, .. } = o {
                if s.labels[id as usize] == NO_LABEL {
                    s.labels[id as usize] = s.next;
                    s.next += 1;
                }
            }
        }
        s
    }

    fn run(self) -> Result<Option<Term>> {
        let n = self.factors.len();
        let mut frontier = vec![State {
            used: 0,
            labels: vec![NO_LABEL; self.n_dummies],
            next: 0,
            sign: 1,
            choice: Vec::with_capacity(n),
        }];
        let mut buf = Vec::new();
        for _level in 0..n {
            let mut best: Option<Vec<u64>> = None;
            let mut cands: Vec<(usize, usize, usize)> = Vec::new();
            for (si, st) in frontier.iter().enumerate() {
                for fi in 0..n {
                    if st.used & (1u128 << fi) != 0 {
                        continue;
                    }
                    for ai in 0..self.factors[fi].arrangements.len() {
                        match self.code(st, fi, ai, &mut buf, best.as_deref()) {
                            Ordering::Less => {
                                best = Some(buf.clone());
                                cands.clear();
                                cands.push((si, fi, ai));
                            }
                            Ordering::Equal => cands.push((si, fi, ai)),
                            Ordering::Greater => {}
                        }
                    }
                }
            }
            let mut seen: HashMap<(u128, Vec<u32>), i8> = HashMap::new();
            let mut next = Vec::with_capacity(cands.len());
            for (si, fi, ai) in cands {
                let s = self.apply(&frontier[si], fi, ai);
                match seen.get(&(s.used, s.labels.clone())) {
                    Some(&sg) if sg == s.sign => continue,
                    Some(_) => return Ok(None),
                    None => {
                        seen.insert((s.used, s.labels.clone()), s.sign);
                        next.push(s);
                    }
                }
            }
            frontier = next;
        }
        let sign = frontier[0].sign;
        if frontier.iter().any(|s| s.sign != sign) {
            return Ok(None);
        }
        Ok(Some(self.build(&frontier[0])))
    }

    fn build(&self, st: &State) -> Term {
        let free: BTreeSet<&str> = self.free_names.iter().map(|s| s.as_str()).collect();
        let mut names: Vec<Sym> = Vec::with_capacity(self.n_dummies);
        let mut extra = 1usize;
        for &p in NAME_POOL {
            if names.len() == self.n_dummies {
                break;
            }
            if !free.contains(p) {
                names.push(Sym::from(p));
            }
        }
        while names.len() < self.n_dummies {
            let s = format!("a{extra}");
            extra += 1;
            if !free.contains(s.as_str()) {
                names.push(Sym::from(s));
            }
        }
        let mut seen = vec![false; self.n_dummies];
        let mut factors = Vec::with_capacity(st.choice.len());
        for &(fi, ai) in &st.choice {
            let (fi, ai) = (fi as usize, ai as usize);
            let src = &self.term.factors[fi];
            let prep = &self.factors[fi];
            let arr = &prep.arrangements[ai];
            let mut conv = |o: Occ, orig: &Index| -> Index {
                match o {
                    Occ::Free { .. } => orig.clone(),
                    Occ::Dummy { id, var } => {
                        let name = names[st.labels[id as usize] as usize].clone();
                        let var = if self.flat {
                            if seen[id as usize] {
                                Variance::Up
                            } else {
                                Variance::Lo
                            }
                        } else {
                            var
                        };
                        seen[id as usize] = true;
                        Index { name, var }
                    }
                }
            };
            let derivs: Vec<Index> =
                arr.derivs.iter().map(|&p| conv(prep.derivs[p as usize], &src.derivs[p as usize])).collect();
            let slots: Vec<Index> =
                arr.slots.iter().map(|&p| conv(prep.slots[p as usize], &src.slots[p as usize])).collect();
            let mut f = Factor { head: src.head.clone(), derivs, slots };
            normalize_metric_identity(&mut f);
            factors.push(f);
        }
        let mut coeff = self.term.coeff.clone();
        if st.sign < 0 {
            coeff = -coeff;
        }
        Term { coeff, params: self.term.params.clone(), factors }
    }
}

/// Canonicalize a single term into a one-term expression (or zero).
pub fn canonical_term_expr(t: &Term, reg: &Registry, dim: Dim) -> Result<TensorExpr> {
    Ok(match canonicalize_term(t, reg, dim)? {
        Some(t) => TensorExpr { terms: vec![t], dim },
        None => TensorExpr::zero().with_dim(dim),
    })
}

/// Whether `e` is in canonical form.
pub fn is_canonical(e: &TensorExpr, reg: &Registry) -> Result<bool> {
    Ok(canonicalize(e, reg)? == *e)
}
