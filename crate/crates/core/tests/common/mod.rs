//! Random well-formed tensor expressions for property tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emt_core::registry::{FieldKind, SlotSymmetry, Symmetry};
use emt_core::{Factor, Index, Rational, Registry, Sym, Term, TensorExpr, Variance};

pub const FREE: [&str; 2] = ["ga", "rh"];
const NAMES: [&str; 16] = ["a", "b", "c", "d", "e", "f", "k", "l", "m", "n", "p", "q", "r", "s", "u", "v"];

/// Standard fields plus an antisymmetric rank-2 `B` and an unsymmetric
/// rank-3 `W`.
pub fn registry() -> Registry {
    let mut r = Registry::standard();
    r.insert("B", 2, SlotSymmetry::whole(Symmetry::Antisymmetric), FieldKind::Dynamical);
    r.insert("W", 3, SlotSymmetry::NONE, FieldKind::Dynamical);
    r
}

const HEADS: [(&str, usize); 5] = [("phi", 0), ("A", 1), ("h", 2), ("B", 2), ("W", 3)];

#[derive(Clone, Copy)]
enum Slot {
    Slot(usize, usize),
    Deriv(usize, usize),
}

fn term(rng: &mut ChaCha8Rng, free: bool) -> Term {
    let mut factors: Vec<Factor> = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let (head, rank) = HEADS[rng.gen_range(0..HEADS.len())];
        let nd = rng.gen_range(0..=2);
        let blank = || Index::lo("_");
        factors.push(Factor::new(head, vec![blank(); rank]).with_derivs(vec![blank(); nd]));
    }
    let with_eta = rng.gen_bool(0.25);
    let slot_count = |fs: &[Factor]| fs.iter().map(|f| f.slots.len() + f.derivs.len()).sum::<usize>();
    // flexible slots must cover the two metric slots, and pair up evenly
    let need = if with_eta { 2 } else { 0 } + if free { 2 } else { 0 };
    while slot_count(&factors) < need || (slot_count(&factors) - need) % 2 == 1 {
        let k = rng.gen_range(0..factors.len());
        factors[k].derivs.push(Index::lo("_"));
    }
    let mut slots: Vec<Slot> = Vec::new();
    for (i, f) in factors.iter().enumerate() {
        slots.extend((0..f.slots.len()).map(|j| Slot::Slot(i, j)));
        slots.extend((0..f.derivs.len()).map(|j| Slot::Deriv(i, j)));
    }
    slots.shuffle(rng);
    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(rng);
    let mut names = names.into_iter();
    let set = |fs: &mut Vec<Factor>, s: Slot, ix: Index| match s {
        Slot::Slot(i, j) => fs[i].slots[j] = ix,
        Slot::Deriv(i, j) => fs[i].derivs[j] = ix,
    };
    let mut rest = slots.into_iter();
    if free {
        for n in FREE {
            set(&mut factors, rest.next().unwrap(), Index::up(n));
        }
    }
    let mut metric = None;
    if with_eta {
        let var = if rng.gen_bool(0.5) { Variance::Up } else { Variance::Lo };
        let (x, y) = (names.next().unwrap(), names.next().unwrap());
        set(&mut factors, rest.next().unwrap(), Index::new(x, var.flip()));
        set(&mut factors, rest.next().unwrap(), Index::new(y, var.flip()));
        metric = Some(Factor::eta(Index::new(x, var), Index::new(y, var)));
    }
    let rest: Vec<Slot> = rest.collect();
    for pair in rest.chunks(2) {
        let n = names.next().unwrap();
        let (u, l) = if rng.gen_bool(0.5) { (pair[0], pair[1]) } else { (pair[1], pair[0]) };
        set(&mut factors, u, Index::up(n));
        set(&mut factors, l, Index::lo(n));
    }
    factors.extend(metric);
    factors.shuffle(rng);
    let num: i64 = [-5, -3, -2, -1, 1, 2, 3, 5][rng.gen_range(0..8)];
    let den: i64 = rng.gen_range(1..=3);
    let mut t = Term::new(Rational::new(num.into(), den.into()), factors);
    if rng.gen_bool(0.2) {
        t.params = vec![Sym::from("c1")];
    }
    t
}

/// A sum of one to four random terms; with `free`, every term carries the
/// free indices `^ga ^rh`.
pub fn random_expr(seed: u64, free: bool) -> TensorExpr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    TensorExpr::from_terms((0..n).map(|_| term(&mut rng, free)).collect())
}

/// `e` with every dummy renamed and each term's factors reversed.
pub fn relabeled(e: &TensorExpr, seed: u64) -> TensorExpr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = e.clone();
    for t in &mut out.terms {
        let mut targets: Vec<&str> = NAMES.to_vec();
        targets.shuffle(&mut rng);
        let dummies: Vec<Sym> = t.dummy_names().into_iter().collect();
        let map = dummies.into_iter().zip(targets.iter().map(|n| Sym::from(format!("{n}{n}")))).collect();
        t.rename(&map);
        t.factors.reverse();
    }
    out
}
