//! Exact numeric oracle and property checks.
//!
//! Expressions are evaluated on random polynomial field configurations at
//! integer points with exact rational arithmetic, in signature
//! diag(+1, -1, -1, -1). Polynomial identities either hold on every sample
//! or produce a concrete witness.

pub mod config;
pub mod eval;
pub mod oracle;
pub mod props;

pub use config::{configurable_fields, sample_config, sample_point, FieldConfig, FieldShape, Poly};
pub use eval::{evaluate, PointEvaluator};
pub use oracle::{oracle_equal, oracle_samples, oracle_zero, OracleOptions, OracleReport, Verdict, Witness};
pub use props::{check_property, divergence, CheckContext, Conservation, Mode, Property, PropertyReport, PropVerdict, PropWitness};
