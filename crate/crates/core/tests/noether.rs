use emt_core::canon::equal;
use emt_core::corpus;
use emt_core::dsl::{expand_defs, Program};
use emt_core::variational::{
    noether_current, noether_emt, noether_identity_residual, program_rules, rules_with_defaults, VariationRule,
};
use emt_core::TensorExpr;

fn canonical_rules(p: &Program, l: &TensorExpr) -> Vec<VariationRule> {
    rules_with_defaults(l, &[], &p.registry()).unwrap()
}

#[test]
fn maxwell_bessel_hagen_matches_reference() {
    let p = corpus::em_bessel_hagen();
    let reg = p.registry();
    let l = expand_defs(&p).unwrap();
    let t = noether_emt(&l, &program_rules(&p).unwrap(), &reg).unwrap();
    assert!(equal(&t, &corpus::em_emt().unwrap(), &reg).unwrap());
}

#[test]
fn maxwell_canonical_current_is_not_gauge_invariant_form() {
    let p = corpus::em();
    let reg = p.registry();
    let l = expand_defs(&p).unwrap();
    let j = noether_current(&l, &canonical_rules(&p, &l), &reg).unwrap();
    let want = p.parse_expr("eta[^mu,^nu] (-1/4) F[a,b] F[^a,^b] + F[^mu,^w] d[^nu] A[w]").unwrap();
    assert!(equal(&j, &want, &reg).unwrap());
}

#[test]
fn scalar_reference() {
    let p = corpus::kg();
    let reg = p.registry();
    let l = expand_defs(&p).unwrap();
    let t = noether_emt(&l, &canonical_rules(&p, &l), &reg).unwrap();
    let want = p.parse_expr("d[^ga] phi d[^rh] phi - 1/2 eta[^ga,^rh] d[a] phi d[^a] phi").unwrap();
    assert!(equal(&t, &want, &reg).unwrap());
}

#[test]
fn identity_residual_vanishes_for_corpus() {
    for (name, src) in corpus::LAGRANGIANS {
        let p = emt_core::dsl::parse(src).unwrap();
        let reg = p.registry();
        let l = expand_defs(&p).unwrap();
        let r = noether_identity_residual(&l, &canonical_rules(&p, &l), &reg).unwrap();
        assert!(r.is_zero(), "{name}: {} residual terms", r.len());
    }
    let p = corpus::em_bessel_hagen();
    let l = expand_defs(&p).unwrap();
    let r = noether_identity_residual(&l, &program_rules(&p).unwrap(), &p.registry()).unwrap();
    assert!(r.is_zero());
}
