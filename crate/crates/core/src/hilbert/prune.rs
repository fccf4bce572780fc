//! Dropping curved terms that cannot survive variation at the flat metric.
//!
//! After the metric Euler derivative every surviving term is evaluated at
//! `g = eta`, where any remaining metric derivative vanishes. The Euler
//! operator removes at most one differentiated metric factor per term, so a
//! term with two such factors contributes nothing.

use crate::expr::{Factor, Term};
use crate::registry::GAMMA;

use super::promote::{is_metric_derivative, CurvedLagrangian};

/// Derivative order on the metric carried by one factor: `Gamma` with `k`
/// derivatives has order `k + 1`, a metric head with `k` derivatives has
/// order `k`.
pub fn metric_derivative_order(f: &Factor) -> usize {
    if !is_metric_derivative(f) {
        0
    } else if f.head.as_str() == GAMMA {
        f.derivs.len() + 1
    } else {
        f.derivs.len()
    }
}

/// Number of factors carrying a metric derivative.
pub fn grade(t: &Term) -> usize {
    t.factors.iter().filter(|f| is_metric_derivative(f)).count()
}

/// True when the term can contribute to the Euler derivative at flat
/// metric with derivative pieces up to order `max_use`.
pub fn survives(t: &Term, max_use: usize) -> bool {
    match grade(t) {
        0 => true,
        1 => t.factors.iter().map(metric_derivative_order).max().unwrap_or(0) <= max_use,
        _ => false,
    }
}

/// Keep the terms of grade 0, and the terms of grade 1 whose metric
/// derivative order is at most `max_use`. With `max_use = 2` this is
/// exactly the part of `c` that contributes to the flat-space metric
/// Euler derivative.
pub fn prune_flat_vanishing(c: &CurvedLagrangian, max_use: usize) -> CurvedLagrangian {
    let mut expr = c.expr.clone();
    expr.terms.retain(|t| survives(t, max_use));
    CurvedLagrangian { expr }
}
