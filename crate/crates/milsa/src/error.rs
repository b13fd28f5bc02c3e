//! CLI error taxonomy mapped onto process exit codes.

use milsa_core::MilError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or command usage (exit 1).
    #[error("config error: {0}")]
    Config(String),
    /// Unreadable or malformed data files, IO failures (exit 2).
    #[error("data error: {0}")]
    Data(String),
    /// Numeric failure during training or evaluation (exit 3).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<MilError> for CliError {
    fn from(e: MilError) -> Self {
        match &e {
            MilError::Format(_) | MilError::Sampling(_) => CliError::Data(e.to_string()),
            MilError::NonFinite { .. } | MilError::Training(_) | MilError::UndefinedMetric(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// IO on a data/output file with the path in the message.
pub fn data_io<T>(path: &std::path::Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
