//! Application error type with the exit-code policy: 0 success,
//! 2 validation problems (bad inputs, bad config, refused resume),
//! 3 stage/runtime failures.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Validation(String),

    #[error("stage {stage} failed: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path} line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl AppError {
    pub fn validation(message: impl Into<String>) -> Self {
        AppError::Validation(message.into())
    }

    pub fn stage(stage: &'static str, message: impl ToString) -> Self {
        AppError::Stage {
            stage,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Stage { .. } => 3,
            _ => 2,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
