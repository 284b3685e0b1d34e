//! Command-line plumbing for rank-sum model selection: configuration,
//! CSV/JSON exchange and report emission.

pub mod commands;
pub mod config;
pub mod csvio;

use ranksel_core::Error as CoreError;

/// Failure classes, each with its own process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(m) => Self::Data(m),
            CoreError::Contract(m) | CoreError::Numerical(m) => Self::Numerical(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(format!("i/o: {e}"))
    }
}

pub use commands::{run, ReportBundle};
pub use config::RunConfig;
