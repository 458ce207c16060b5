use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid function does not belong to this domain")]
    DomainMismatch,

    #[error("constraint functional vanishes (u*v is identically zero on the grid)")]
    DegenerateConstraint,

    #[error("solver did not converge within {iterations} iterations (best lambda {lambda})")]
    NonConvergence {
        iterations: usize,
        lambda: f64,
        best: Box<crate::solver::EigenPair>,
    },

    #[error("exterior tail diverges: t*p = {tp} must exceed the dimension {dim}")]
    TailDivergence { tp: f64, dim: usize },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("node index {index} out of range for {len} nodes")]
    NodeOutOfRange { index: usize, len: usize },

    #[error("input outside the admissible set: {0}")]
    OutOfDomain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
