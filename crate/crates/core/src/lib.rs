//! Symbolic tensor calculus for deriving energy-momentum tensors of flat
//! spacetime field theories, by Noether's theorem and by metric variation,
//! with an exact rational numeric oracle for cross-checking.

pub mod algebra;
pub mod canon;
pub mod corpus;
pub mod error;
pub mod expr;
pub mod hilbert;
pub mod dsl;
pub mod registry;
pub mod variational;
pub mod verify;

pub use canon::{canonicalize, equal, expand};
pub use error::{Error, Result};
pub use expr::{Dim, Factor, Index, Rational, Sym, Term, TensorExpr, Variance};
pub use registry::Registry;
