use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MjpError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid rate matrix: {0}")]
    InvalidRateMatrix(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("uniformization policy violated: {0}")]
    OmegaPolicy(String),
}

pub type Result<T> = std::result::Result<T, MjpError>;
