use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid index wiring at `{index}`: {reason}")]
    Validation { index: String, reason: String },

    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("arity mismatch for `{name}`: expected {expected}, found {found}")]
    Arity { name: String, expected: usize, found: usize },

    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),

    #[error("recursive macro definition involving `{0}`")]
    RecursiveMacro(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("expression has symbolic dimension; fix the dimension before numeric evaluation")]
    DimNotFixed,

    #[error("no variation rule for dynamical field `{0}`")]
    MissingRule(String),

    #[error("index `{0}` already used in the expression")]
    IndexCollision(String),

    #[error("json error: {0}")]
    Json(String),
}
