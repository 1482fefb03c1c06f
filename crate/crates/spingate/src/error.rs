use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI run, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input, detected before any computation.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Runtime(_) | CliError::Io { .. } => 2,
        }
    }
}

impl From<spingate_core::Error> for CliError {
    fn from(e: spingate_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
