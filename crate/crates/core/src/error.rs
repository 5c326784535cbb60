use thiserror::Error;

/// Errors raised by the numerical kernels and the estimation pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("design is not full rank: {0}")]
    NotFullRank(String),

    #[error("invalid level: {0}")]
    InvalidLevel(String),

    #[error("search budget exhausted: {0}")]
    BudgetExceeded(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
