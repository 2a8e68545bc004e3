use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: n = {0}, need n >= 2")]
    InvalidDimension(usize),

    #[error("elements belong to different algebras ({left} vs {right})")]
    AlgebraMismatch { left: String, right: String },

    #[error("matrix is not in the algebra: max violation {max_violation:.3e}")]
    NotInAlgebra { max_violation: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("submodule {id} is not invariant: residual {residual:.3e}")]
    InvarianceViolation { id: String, residual: f64 },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("eigenvalue map does not cover the fine catalog: {0}")]
    Coverage(String),

    #[error("unsupported: {0}")]
    UnsupportedFamily(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("metric failed validation: {0}")]
    InvalidMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
