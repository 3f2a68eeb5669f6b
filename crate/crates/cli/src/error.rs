use fedwhit::Error;
use thiserror::Error;

/// Failures that stop a task (or the whole run), by exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn schema(path: &str, e: impl std::fmt::Display) -> Self {
        CliError::Schema(format!("{path}: {e}"))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::UnknownVariable(_) => CliError::Schema(e.to_string()),
            Error::InternalConsistency(m) => CliError::Internal(m),
            Error::Precondition(m) => CliError::Precondition(m),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
