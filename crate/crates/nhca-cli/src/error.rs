use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nhca_core::Error),

    #[error("{0}")]
    Usage(String),

    /// A diagnostic ran but its pass condition did not hold.
    #[error("{0}")]
    Assertion(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "UsageError",
            CliError::Assertion(_) => "AssertionError",
            CliError::Io { .. } | CliError::Csv(_) => "IoError",
        }
    }

    /// 2 for anything wrong with the inputs, 3 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(nhca_core::Error::Io(_) | nhca_core::Error::Diagonal { .. }) => 2,
            CliError::Core(_) | CliError::Assertion(_) => 3,
            CliError::Usage(_) | CliError::Io { .. } | CliError::Csv(_) => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}
