//! Bundled theories and reference expressions.

use crate::canon::canonicalize;
use crate::dsl::{parse, Program};
use crate::error::Result;
use crate::expr::TensorExpr;

pub const KG: &str = include_str!("../corpus/kg.lag");
pub const EM: &str = include_str!("../corpus/em.lag");
pub const EM_BESSEL_HAGEN: &str = include_str!("../corpus/em_bessel_hagen.lag");
pub const FIERZ_PAULI: &str = include_str!("../corpus/fierz_pauli.lag");
pub const GAUSS_BONNET: &str = include_str!("../corpus/gauss_bonnet.lag");

pub const EM_EMT_SRC: &str = include_str!("../corpus/em_emt.expr");
pub const GB_EMT_SRC: &str = include_str!("../corpus/gb_emt.expr");
pub const GB_LAGRANGIAN_SRC: &str = include_str!("../corpus/gb_lagrangian.expr");

pub const EM_EMT_JSON: &str = include_str!("../corpus/em_emt.json");
pub const GB_EMT_JSON: &str = include_str!("../corpus/gb_emt.json");
pub const GB_LAGRANGIAN_JSON: &str = include_str!("../corpus/gb_lagrangian.json");

/// Every bundled Lagrangian by file name.
pub const LAGRANGIANS: &[(&str, &str)] = &[
    ("kg.lag", KG),
    ("em.lag", EM),
    ("fierz_pauli.lag", FIERZ_PAULI),
    ("gauss_bonnet.lag", GAUSS_BONNET),
];

pub fn kg() -> Program {
    parse(KG).expect("bundled kg.lag parses")
}

pub fn em() -> Program {
    parse(EM).expect("bundled em.lag parses")
}

/// em.lag with the gauge-completed variation rule.
pub fn em_bessel_hagen() -> Program {
    em().extend(EM_BESSEL_HAGEN).expect("bundled rule file parses")
}

pub fn fierz_pauli() -> Program {
    parse(FIERZ_PAULI).expect("bundled fierz_pauli.lag parses")
}

pub fn gauss_bonnet() -> Program {
    parse(GAUSS_BONNET).expect("bundled gauss_bonnet.lag parses")
}

/// Maxwell energy-momentum tensor, canonical, free indices `^ga ^rh`.
pub fn em_emt() -> Result<TensorExpr> {
    let p = em();
    canonicalize(&p.parse_expr(EM_EMT_SRC)?, &p.registry())
}

/// Gauss-Bonnet energy-momentum tensor, canonical, free indices `^nu ^om`.
pub fn gb_emt() -> Result<TensorExpr> {
    let p = gauss_bonnet();
    canonicalize(&p.parse_expr(GB_EMT_SRC)?, &p.registry())
}

/// The expanded curvature-squared Lagrangian written out term by term.
pub fn gb_lagrangian() -> Result<TensorExpr> {
    let p = gauss_bonnet();
    canonicalize(&p.parse_expr(GB_LAGRANGIAN_SRC)?, &p.registry())
}
