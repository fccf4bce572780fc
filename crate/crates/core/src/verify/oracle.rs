//! Randomized exact comparison of expressions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canon::align_free_indices;
use crate::error::{Error, Result};
use crate::expr::{Dim, Rational, Sym, TensorExpr, DIM_PARAM};
use crate::registry::Registry;

use super::config::{configurable_fields, sample_config, sample_point, N};
use super::eval::{rational_text, PointEvaluator};

/// Sampling knobs shared by every oracle run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleOptions {
    pub trials: usize,
    pub seed: u64,
    pub degree: u32,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { trials: 20, seed: 1, degree: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Equal,
    Unequal,
}

/// One sample where the compared expressions differ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: usize,
    pub config_seed: u64,
    pub point: Vec<String>,
    pub indices: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub verdict: Verdict,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl OracleReport {
    pub fn is_equal(&self) -> bool {
        self.verdict == Verdict::Equal
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Highest derivative order on any non-constant factor.
pub fn max_jet_order(e: &TensorExpr) -> u32 {
    e.terms
        .iter()
        .flat_map(|t| t.factors.iter())
        .map(|f| f.derivs.len() as u32)
        .max()
        .unwrap_or(0)
}

/// Parameters other than `D` that occur in `e`.
fn free_params(e: &TensorExpr) -> Vec<Sym> {
    let mut ps: Vec<Sym> = e
        .terms
        .iter()
        .flat_map(|t| t.params.iter())
        .filter(|p| p.as_str() != DIM_PARAM)
        .cloned()
        .collect();
    ps.sort();
    ps.dedup();
    ps
}

/// Evaluate one sample; `Some` when the value is nonzero.
fn trial(e: &TensorExpr, reg: &Registry, opts: &OracleOptions, k: usize, order: u32) -> Result<Option<Witness>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(k as u64 + 1);
    let config_seed: u64 = rng.gen();
    let cfg = sample_config(config_seed, opts.degree, &configurable_fields(reg), order)?;
    let point = sample_point(&mut rng);
    let mut free: BTreeMap<Sym, usize> = BTreeMap::new();
    for i in e.free_indices() {
        free.insert(i.name, rng.gen_range(0..N));
    }
    let mut params: BTreeMap<Sym, Rational> = BTreeMap::new();
    for p in free_params(e) {
        let v: i64 = rng.gen_range(-5..=5);
        params.insert(p, Rational::from_integer(v.into()));
    }
    let value = PointEvaluator::new(&cfg, point.clone()).evaluate(e, &free, &params)?;
    if value == Rational::from_integer(0.into()) {
        return Ok(None);
    }
    Ok(Some(Witness {
        trial: k,
        config_seed,
        point: point.iter().map(rational_text).collect(),
        indices: free.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        params: params.iter().map(|(k, v)| (k.to_string(), rational_text(v))).collect(),
        value: rational_text(&value),
    }))
}

/// Every nonzero sample of `e` over the trial set, in trial order.
pub fn oracle_samples(e: &TensorExpr, reg: &Registry, opts: &OracleOptions) -> Result<Vec<Witness>> {
    let e = match e.dim {
        Dim::Fixed(4) => e.clone(),
        Dim::Symbolic => e.fix_dim(4),
        Dim::Fixed(n) => return Err(Error::Usage(format!("the oracle works in 4 dimensions, not {n}"))),
    };
    let order = max_jet_order(&e);
    let results: Vec<Result<Option<Witness>>> =
        (0..opts.trials).into_par_iter().map(|k| trial(&e, reg, opts, k, order)).collect();
    let mut out = Vec::new();
    for r in results {
        if let Some(w) = r? {
            out.push(w);
        }
    }
    Ok(out)
}

/// Check that `e` evaluates to zero on every sample.
pub fn oracle_zero(e: &TensorExpr, reg: &Registry, opts: &OracleOptions) -> Result<OracleReport> {
    let witness = oracle_samples(e, reg, opts)?.into_iter().next();
    Ok(OracleReport {
        verdict: if witness.is_none() { Verdict::Equal } else { Verdict::Unequal },
        trials: opts.trials,
        seed: opts.seed,
        witness,
    })
}

/// Compare `a` and `b` numerically. Free indices of `b` are matched to those
/// of `a` by sorted position; the difference is evaluated uncanonicalized.
pub fn oracle_equal(a: &TensorExpr, b: &TensorExpr, reg: &Registry, opts: &OracleOptions) -> Result<OracleReport> {
    let b = align_free_indices(a, b)?;
    let mut d = a.clone() - b;
    d.dim = a.dim.join(d.dim);
    oracle_zero(&d, reg, opts)
}
