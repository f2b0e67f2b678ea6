use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("operator is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("incompatible dimensions: {0}")]
    IncompatibleDims(String),

    #[error("compute budget exceeded: {needed} operations requested, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("invalid k = {k} for n = {n} (need 2 <= k <= n)")]
    InvalidK { k: usize, n: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integer overflow: {0}")]
    Overflow(String),
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSubset(_) => "InvalidSubset",
            Error::NotPsd(_) => "NotPSD",
            Error::IncompatibleDims(_) => "IncompatibleDims",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::InvalidK { .. } => "InvalidK",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::InvalidParam(_) => "InvalidParam",
            Error::InvalidState(_) => "InvalidState",
            Error::Overflow(_) => "Overflow",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
