use std::path::PathBuf;

use mjp_core::MjpError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: line {line}: {message}")]
    Ingest { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] MjpError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// True for problems with the user's configuration or input data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Ingest { .. }
                | HarnessError::Json(_)
                | HarnessError::Core(MjpError::Config(_) | MjpError::OmegaPolicy(_) | MjpError::Unsupported(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
