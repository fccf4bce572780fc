//! Property checks on candidate energy-momentum tensors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::{substitute, total_derivative_unchecked, Rule};
use crate::canon::canonicalize;
use crate::error::{Error, Result};
use crate::expr::{Dim, Factor, Fresh, Index, Sym, TensorExpr};
use crate::registry::Registry;

use super::oracle::{oracle_samples, OracleOptions, Witness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Symmetric,
    Traceless,
    GaugeInvariant,
    Conserved,
    Equal,
}

impl Property {
    pub fn parse(s: &str) -> Result<Property> {
        Ok(match s.trim() {
            "symmetric" => Property::Symmetric,
            "traceless" => Property::Traceless,
            "gauge_invariant" | "gauge-invariant" => Property::GaugeInvariant,
            "conserved" => Property::Conserved,
            other => return Err(Error::Usage(format!("unknown property `{other}`"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::Symmetric => "symmetric",
            Property::Traceless => "traceless",
            Property::GaugeInvariant => "gauge_invariant",
            Property::Conserved => "conserved",
            Property::Equal => "equal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Symbolic,
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropVerdict {
    Pass,
    Fail,
}

/// How a divergence vanishes, when it does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conservation {
    /// The canonical divergence is the zero expression.
    Identical,
    /// The canonical divergence is nonzero but evaluates to zero on every
    /// sample at dimension 4.
    OracleZeroOnly,
    NotConserved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropWitness {
    Residual { expr: serde_json::Value },
    Samples { samples: Vec<Witness> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: Property,
    pub verdict: PropVerdict,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conservation: Option<Conservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<PropWitness>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.verdict == PropVerdict::Pass
    }
}

/// Inputs that property checks need beyond the tensor itself.
#[derive(Clone, Debug)]
pub struct CheckContext {
    pub dim: Dim,
    pub registry: Registry,
    pub gauge_rule: Option<Rule>,
    pub mode: Mode,
    pub oracle: OracleOptions,
    /// Free index the divergence is taken on; the first sorted free index
    /// when unset.
    pub divergence_index: Option<Sym>,
}

impl CheckContext {
    pub fn new(registry: Registry) -> Self {
        CheckContext {
            dim: Dim::Fixed(4),
            registry,
            gauge_rule: None,
            mode: Mode::Symbolic,
            oracle: OracleOptions::default(),
            divergence_index: None,
        }
    }
}

fn two_free(t: &TensorExpr) -> Result<(Index, Index)> {
    let f = t.free_indices();
    if f.len() != 2 {
        return Err(Error::Usage(format!("expected two free indices, found {}", f.len())));
    }
    if f[0].var != f[1].var {
        return Err(Error::Usage(format!("free indices {} and {} differ in variance", f[0], f[1])));
    }
    Ok((f[0].clone(), f[1].clone()))
}

fn with_dim(t: &TensorExpr, dim: Dim) -> TensorExpr {
    match dim {
        Dim::Fixed(n) => t.fix_dim(n),
        Dim::Symbolic => t.clone().with_dim(Dim::Symbolic),
    }
}

/// `T` with its two free indices swapped, minus `T`.
fn symmetry_residual(t: &TensorExpr) -> Result<TensorExpr> {
    let (a, b) = two_free(t)?;
    let mut map = BTreeMap::new();
    map.insert(a.name.clone(), b.name.clone());
    map.insert(b.name.clone(), a.name.clone());
    Ok(t.rename(&map) - t.clone())
}

/// `T` contracted with the metric on its two free indices.
fn trace(t: &TensorExpr) -> Result<TensorExpr> {
    let (a, b) = two_free(t)?;
    let eta = Factor::eta(a.flipped(), b.flipped());
    let mut out = t.clone();
    for term in &mut out.terms {
        term.factors.push(eta.clone());
    }
    Ok(out)
}

/// `∂ T` contracted on the chosen free index.
pub fn divergence(t: &TensorExpr, index: Option<&Sym>) -> Result<TensorExpr> {
    let (a, b) = two_free(t)?;
    let on = match index {
        None => a,
        Some(n) if *n == a.name => a,
        Some(n) if *n == b.name => b,
        Some(n) => return Err(Error::Usage(format!("`{n}` is not a free index"))),
    };
    let mut fresh = Fresh::avoiding(t.all_names().iter());
    let d = fresh.name();
    let mut map = BTreeMap::new();
    map.insert(on.name.clone(), d.clone());
    let out = total_derivative_unchecked(&t.rename(&map), &Index::new(d, on.var.flip()));
    Ok(out)
}

fn gauge_residual(t: &TensorExpr, rule: &Rule) -> Result<TensorExpr> {
    Ok(substitute(t, rule)? - t.clone())
}

fn residual(t: &TensorExpr, property: Property, ctx: &CheckContext) -> Result<TensorExpr> {
    match property {
        Property::Symmetric => symmetry_residual(t),
        Property::Traceless => trace(t),
        Property::GaugeInvariant => {
            let rule = ctx
                .gauge_rule
                .as_ref()
                .ok_or_else(|| Error::Usage("gauge_invariant needs a gauge rule".into()))?;
            gauge_residual(t, rule)
        }
        Property::Conserved => divergence(t, ctx.divergence_index.as_ref()),
        Property::Equal => Err(Error::Usage("use oracle_equal or canon::equal for equality".into())),
    }
}

fn numeric(e: &TensorExpr, ctx: &CheckContext) -> Result<Vec<Witness>> {
    if let Dim::Fixed(n) = ctx.dim {
        if n != 4 {
            return Err(Error::Usage(format!("numeric checks run in 4 dimensions, not {n}")));
        }
    }
    oracle_samples(&e.fix_dim(4), &ctx.registry, &ctx.oracle)
}

/// Check one property of `t`.
///
/// Symbolic mode canonicalizes the residual at `ctx.dim`. Numeric mode
/// evaluates the raw residual with the oracle at dimension 4. A symbolic
/// conservation check also classifies a nonzero residual numerically.
pub fn check_property(t: &TensorExpr, property: Property, ctx: &CheckContext) -> Result<PropertyReport> {
    let raw = residual(t, property, ctx)?;
    let mut report = PropertyReport { property, verdict: PropVerdict::Pass, mode: ctx.mode, conservation: None, witness: None };
    match ctx.mode {
        Mode::Symbolic => {
            let r = canonicalize(&with_dim(&raw, ctx.dim), &ctx.registry)?;
            if !r.is_zero() {
                report.verdict = PropVerdict::Fail;
                report.witness = Some(PropWitness::Residual { expr: r.to_json_value() });
            }
            if property == Property::Conserved {
                report.conservation = Some(if r.is_zero() {
                    Conservation::Identical
                } else if numeric(&r, ctx)?.is_empty() {
                    Conservation::OracleZeroOnly
                } else {
                    Conservation::NotConserved
                });
            }
        }
        Mode::Numeric => {
            let samples = numeric(&raw, ctx)?;
            if !samples.is_empty() {
                report.verdict = PropVerdict::Fail;
                report.witness = Some(PropWitness::Samples { samples });
            }
            if property == Property::Conserved {
                report.conservation = Some(if report.passed() {
                    Conservation::OracleZeroOnly
                } else {
                    Conservation::NotConserved
                });
            }
        }
    }
    Ok(report)
}
