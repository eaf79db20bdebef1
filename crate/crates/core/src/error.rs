use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("setting out of range: {0}")]
    SettingOutOfRange(String),

    #[error("malformed box: {0}")]
    MalformedBox(String),

    #[error("state space of {size} entries exceeds the evaluation cap of {cap}")]
    Infeasible { size: u128, cap: u128 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed partition: {0}")]
    MalformedPartition(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
