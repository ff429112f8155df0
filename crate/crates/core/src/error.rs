use thiserror::Error;

use crate::lp::LpStatus;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("value {0} outside the penalty domain [0, 1]")]
    Domain(f64),

    #[error("confidence set exhausted for resource {resource}")]
    EmptyConfidenceSet { resource: usize },

    #[error("allocation LP not solvable: {0:?}")]
    Lp(LpStatus),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
