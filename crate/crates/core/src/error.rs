use thiserror::Error;

use crate::eigensolve::EigenPair;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("non-finite value encountered: {0}")]
    NumericError(String),

    #[error("wrong exponent regime: {0}")]
    RegimeError(String),

    /// The weighted integral of |u|^r that a constraint or quotient divides by is not positive.
    #[error("indefinite constraint: weighted integral {value} is not positive")]
    IndefiniteConstraint { value: f64 },

    #[error("positivity violated: {0}")]
    PositivityError(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<EigenPair>>,
    },

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
