use thiserror::Error;

use crate::config::Report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid scenario:\n{0}")]
    Invalid(Report),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("simulation failed: {0}")]
    Runtime(#[from] cosserat_core::error::Error),

    #[error("{0}")]
    Plot(String),
}

impl CliError {
    /// Process exit status: 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) | CliError::Plot(_) => 1,
            CliError::Io { .. } | CliError::Runtime(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
