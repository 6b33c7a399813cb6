use thiserror::Error;

/// Errors produced by the channel, estimation and criterion routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid power delay profile: {0}")]
    InvalidProfile(String),
    #[error("invalid correlation function: {0}")]
    InvalidCorrelation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate codebook: {0}")]
    DegenerateCodebook(String),
}

pub type Result<T> = std::result::Result<T, Error>;
