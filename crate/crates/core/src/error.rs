use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("input too short: {len} samples, need at least {needed}")]
    InputTooShort { len: usize, needed: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {block} at index {index}")]
    NonFinite { block: String, index: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}
