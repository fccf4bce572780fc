use std::collections::BTreeMap;

use emt_core::canon::{canonicalize, difference, equal};
use emt_core::corpus;
use emt_core::dsl::parse;
use emt_core::hilbert::prune::survives;
use emt_core::hilbert::{
    hilbert_emt, hilbert_emt_with, hilbert_stages, metric_variation, restrict_to_flat, CurvedLagrangian, HilbertOptions,
    VariationMode,
};
use emt_core::verify::oracle::{oracle_equal, oracle_zero, OracleOptions};
use emt_core::verify::props::divergence;
use emt_core::{Error, Rational, Sym, TensorExpr};

fn gauss_bonnet_point(t: &TensorExpr) -> TensorExpr {
    let vals: BTreeMap<Sym, Rational> = [("A", (1, 4)), ("B", (-1, 1)), ("C", (1, 4))]
        .into_iter()
        .map(|(k, (n, d))| (Sym::from(k), Rational::new(n.into(), d.into())))
        .collect();
    t.substitute_params(&vals)
}

#[test]
fn pruning_is_sound_for_first_order_theories() {
    for p in [corpus::kg(), corpus::em()] {
        let reg = p.registry();
        let fast = hilbert_emt(&p).unwrap();
        let slow = hilbert_emt_with(&p, HilbertOptions::exact()).unwrap();
        assert!(equal(&fast, &slow, &reg).unwrap());
        assert!(oracle_equal(&fast, &slow, &reg, &OracleOptions::default()).unwrap().is_equal());
    }
}

#[test]
fn curvature_square_differs_from_noether_reference() {
    let p = corpus::gauss_bonnet();
    let reg = p.registry();
    let t = gauss_bonnet_point(&hilbert_emt(&p).unwrap());
    let n = corpus::gb_emt().unwrap();
    assert!(!difference(&t, &n, &reg).unwrap().is_zero());
    let r = oracle_equal(&t, &n, &reg, &OracleOptions::default()).unwrap();
    assert!(!r.is_equal());
    assert!(r.witness.is_some());
}

#[test]
fn curvature_square_is_symmetric_and_conserved_at_gauss_bonnet_point() {
    // the quadratic Gauss-Bonnet action is a total derivative, so its field
    // equations vanish identically and the metric tensor is conserved off shell
    let p = corpus::gauss_bonnet();
    let reg = p.registry();
    let t = hilbert_emt(&p).unwrap();
    let swap: BTreeMap<Sym, Sym> = [("ga", "rh"), ("rh", "ga")].into_iter().map(|(a, b)| (a.into(), b.into())).collect();
    assert!(equal(&t, &t.rename(&swap), &reg).unwrap());
    let tg = gauss_bonnet_point(&t);
    for ix in ["ga", "rh"] {
        let d = divergence(&tg, Some(&Sym::from(ix))).unwrap();
        assert!(canonicalize(&d, &reg).unwrap().is_zero());
    }
    let d = divergence(&t, Some(&Sym::from("ga"))).unwrap();
    assert!(!canonicalize(&d, &reg).unwrap().is_zero());
}

#[test]
fn dropped_curvature_terms_vary_to_zero() {
    let p = corpus::gauss_bonnet();
    let reg = p.registry();
    let s = hilbert_stages(&p, HilbertOptions::default()).unwrap();
    let dropped: Vec<_> = s.promoted.expr.terms.iter().filter(|t| !survives(t, 2)).collect();
    assert!(dropped.len() > 100);
    let opts = OracleOptions { trials: 3, ..OracleOptions::default() };
    for t in dropped.iter().step_by(37) {
        let c = CurvedLagrangian { expr: TensorExpr::from_terms(vec![(*t).clone()]) };
        let v = metric_variation(&c, &reg, VariationMode::Exact).unwrap();
        let flat = restrict_to_flat(&v, &reg).unwrap();
        assert!(flat.is_zero());
        assert!(oracle_zero(&flat, &reg, &opts).unwrap().is_equal());
    }
}

#[test]
fn raw_second_derivative_lagrangian_is_unsupported() {
    let src = format!("field h {{rank:2, symmetry:symmetric}}\nparam A, B, C\nlagrangian = {}", corpus::GB_LAGRANGIAN_SRC);
    let p = parse(&src).unwrap();
    assert!(matches!(hilbert_emt(&p), Err(Error::Unsupported(_))));
}
