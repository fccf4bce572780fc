//! Energy-momentum tensors by metric variation.
//!
//! The flat Lagrangian is promoted to a curved-space density, terms that
//! cannot survive at the flat metric are pruned, the Euler derivative with
//! respect to `g_{ga rh}` is taken and the result is restricted back to
//! `g = eta`:
//!
//! ```text
//! T^{ga rh} = 2 / sqrtg * dL/dg_{ga rh} |_{g = eta}
//! ```
//!
//! Curved expressions use the heads `g`, `ginv`, `sqrtg` and `Gamma`, which
//! are unrelated symbols apart from the explicit rewrites `g ginv -> delta`,
//! the Christoffel expansion and the variation formulas.

pub mod kronecker;
pub mod promote;
pub mod prune;
pub mod report;
pub mod vary;

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canon::canonicalize;
use crate::dsl::Program;
use crate::error::{Error, Result};
use crate::expr::{rat, Sym, TensorExpr};
use crate::registry::Registry;
use crate::variational::EMT_INDICES;

pub use kronecker::{KroneckerCombination, KroneckerKind};
pub use promote::{covariant_curvature, flat_restriction, promote_to_curved, CurvedLagrangian};
pub use prune::{grade, metric_derivative_order, prune_flat_vanishing};
pub use vary::{euler_pieces, expand_metric_derivatives, metric_variation, EulerPieces, VariationMode, VAR_INDICES};

/// Pipeline knobs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertOptions {
    /// Prune before varying.
    pub prune: bool,
    pub mode: VariationMode,
}

impl Default for HilbertOptions {
    fn default() -> Self {
        HilbertOptions { prune: true, mode: VariationMode::FlatSurviving }
    }
}

impl HilbertOptions {
    /// No pruning and full Leibniz rule: slow, but no shortcut is taken.
    pub fn exact() -> Self {
        HilbertOptions { prune: false, mode: VariationMode::Exact }
    }
}

/// Named intermediate results of the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Promoted,
    Pruned,
    Varied,
    Flat,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Promoted, Stage::Pruned, Stage::Varied, Stage::Flat];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Promoted => "promoted",
            Stage::Pruned => "pruned",
            Stage::Varied => "varied",
            Stage::Flat => "flat",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown stage `{s}` (promoted, pruned, varied, flat)")))
    }
}

/// Every stage of one pipeline run. `flat` is the energy-momentum tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct HilbertStages {
    pub promoted: CurvedLagrangian,
    pub pruned: CurvedLagrangian,
    /// `dL/dg_{ga rh}` in the curved alphabet, free indices `^ga ^rh`.
    pub varied: TensorExpr,
    pub flat: TensorExpr,
}

impl HilbertStages {
    pub fn get(&self, s: Stage) -> &TensorExpr {
        match s {
            Stage::Promoted => &self.promoted.expr,
            Stage::Pruned => &self.pruned.expr,
            Stage::Varied => &self.varied,
            Stage::Flat => &self.flat,
        }
    }
}

fn to_emt_names(e: &TensorExpr, reg: &Registry) -> Result<TensorExpr> {
    let map: BTreeMap<Sym, Sym> = [
        (Sym::from(VAR_INDICES.0), Sym::from(EMT_INDICES.0)),
        (Sym::from(VAR_INDICES.1), Sym::from(EMT_INDICES.1)),
    ]
    .into_iter()
    .collect();
    canonicalize(&e.rename(&map), reg)
}

/// `2 dL/dg` at the flat metric, from a curved variation with free indices
/// `^ga ^rh`.
pub fn restrict_to_flat(varied: &TensorExpr, reg: &Registry) -> Result<TensorExpr> {
    canonicalize(&flat_restriction(varied).scale(&rat(2, 1)), reg)
}

/// Run the pipeline keeping every stage.
pub fn hilbert_stages(p: &Program, opts: HilbertOptions) -> Result<HilbertStages> {
    let reg = p.registry();
    let promoted = promote_to_curved(p)?;
    let pruned = if opts.prune { prune_flat_vanishing(&promoted, 2) } else { promoted.clone() };
    let varied = to_emt_names(&metric_variation(&pruned, &reg, opts.mode)?, &reg)?;
    let flat = restrict_to_flat(&varied, &reg)?;
    Ok(HilbertStages { promoted, pruned, varied, flat })
}

/// Energy-momentum tensor `T^{ga rh}` by metric variation.
pub fn hilbert_emt(p: &Program) -> Result<TensorExpr> {
    hilbert_emt_with(p, HilbertOptions::default())
}

pub fn hilbert_emt_with(p: &Program, opts: HilbertOptions) -> Result<TensorExpr> {
    Ok(hilbert_stages(p, opts)?.flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::equal;
    use crate::corpus;
    use crate::dsl::expand_defs;
    use crate::variational::{noether_emt, program_rules, rules_with_defaults};

    #[test]
    fn maxwell_matches_reference() {
        let p = corpus::em();
        let t = hilbert_emt(&p).unwrap();
        assert!(equal(&t, &corpus::em_emt().unwrap(), &p.registry()).unwrap());
        let exact = hilbert_emt_with(&p, HilbertOptions::exact()).unwrap();
        assert!(equal(&t, &exact, &p.registry()).unwrap());
        let bh = corpus::em_bessel_hagen();
        let n = noether_emt(&expand_defs(&bh).unwrap(), &program_rules(&bh).unwrap(), &bh.registry()).unwrap();
        assert!(equal(&t, &n, &p.registry()).unwrap());
    }

    #[test]
    fn scalar_matches_noether() {
        let p = corpus::kg();
        let reg = p.registry();
        let t = hilbert_emt(&p).unwrap();
        let want = p.parse_expr("d[^ga] phi d[^rh] phi - 1/2 eta[^ga,^rh] d[a] phi d[^a] phi").unwrap();
        assert!(equal(&t, &want, &reg).unwrap());
        let l = expand_defs(&p).unwrap();
        let n = noether_emt(&l, &rules_with_defaults(&l, &[], &reg).unwrap(), &reg).unwrap();
        assert!(equal(&t, &n, &reg).unwrap());
        assert!(equal(&t, &hilbert_emt_with(&p, HilbertOptions::exact()).unwrap(), &reg).unwrap());
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("curved".parse::<Stage>().is_err());
    }
}
