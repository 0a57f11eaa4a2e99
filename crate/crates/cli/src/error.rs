use std::process::ExitCode;

use thiserror::Error;

/// Failure of a CLI invocation, mapped onto the documented exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config entries or values (exit code 2).
    #[error("{0}")]
    Validation(String),
    /// The inputs are valid but no design satisfies the constraints (exit code 3).
    #[error("{0}")]
    Infeasible(String),
    /// Reading the config or writing the output failed (exit code 1).
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io(_) => ExitCode::from(1),
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Infeasible(_) => ExitCode::from(3),
        }
    }
}

impl From<grouptest::Error> for CliError {
    fn from(e: grouptest::Error) -> Self {
        match e {
            grouptest::Error::InvalidInput(m) => CliError::Validation(m),
            grouptest::Error::Infeasible(m) => CliError::Infeasible(m),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}
