mod common;

use proptest::prelude::*;

use emt_core::canon::{canonicalize, equal, is_canonical};
use emt_core::verify::oracle::{max_jet_order, oracle_equal, OracleOptions};
use emt_core::{Rational, TensorExpr};

use common::{random_expr, registry, relabeled};

fn oracle_opts(e: &TensorExpr, seed: u64) -> OracleOptions {
    OracleOptions { trials: 3, seed, degree: (max_jet_order(e) + 3).max(4) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_expressions_are_well_formed(seed in any::<u64>(), free in any::<bool>()) {
        let e = random_expr(seed, free);
        for t in &e.terms {
            prop_assert!(t.validate().is_ok(), "{:?}", t);
        }
    }

    #[test]
    fn canonicalization_is_idempotent(seed in any::<u64>(), free in any::<bool>()) {
        let reg = registry();
        let c = canonicalize(&random_expr(seed, free), &reg).unwrap();
        prop_assert_eq!(&canonicalize(&c, &reg).unwrap(), &c);
        prop_assert!(is_canonical(&c, &reg).unwrap());
    }

    #[test]
    fn canonical_form_ignores_dummy_names_and_factor_order(seed in any::<u64>(), free in any::<bool>()) {
        let reg = registry();
        let e = random_expr(seed, free);
        let c = canonicalize(&e, &reg).unwrap();
        prop_assert_eq!(canonicalize(&relabeled(&e, seed), &reg).unwrap(), c);
    }

    #[test]
    fn canonicalization_is_linear(a in any::<u64>(), b in any::<u64>(), k in -4i64..=4, free in any::<bool>()) {
        let reg = registry();
        let (x, y) = (random_expr(a, free), random_expr(b, free));
        let ca = canonicalize(&x, &reg).unwrap();
        let cb = canonicalize(&y, &reg).unwrap();
        prop_assert!(equal(&(x.clone() + y.clone()), &(ca.clone() + cb), &reg).unwrap());
        let q = Rational::from_integer(k.into());
        prop_assert_eq!(canonicalize(&x.scale(&q), &reg).unwrap(), canonicalize(&ca.scale(&q), &reg).unwrap());
        prop_assert!(canonicalize(&(x - ca), &reg).unwrap().is_zero());
    }

    #[test]
    fn canonical_form_agrees_with_oracle(seed in any::<u64>(), free in any::<bool>()) {
        let reg = registry();
        let e = random_expr(seed, free);
        let c = canonicalize(&e, &reg).unwrap();
        let r = oracle_equal(&e, &c, &reg, &oracle_opts(&e, seed)).unwrap();
        prop_assert!(r.is_equal(), "{}", r.to_json());
    }
}
