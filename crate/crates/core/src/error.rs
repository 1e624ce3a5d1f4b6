use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("entry {index} is negative ({value:e})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("column {column} sums to {sum}, expected 1")]
    NotStochastic { column: usize, sum: f64 },

    #[error("matrix entry ({row}, {column}) = {value} lies outside [0, 1]")]
    EntryOutOfRange { row: usize, column: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("{what} = {value} exceeds the supported maximum {max}: {hint}")]
    TooLarge {
        what: &'static str,
        value: usize,
        max: usize,
        hint: &'static str,
    },

    #[error("malformed region data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
