use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error("subgradient oracle contract violated: {0}")]
    OracleContract(String),
    #[error("distance oracle failed: {0}")]
    OracleFailure(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
