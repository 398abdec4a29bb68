use optdesign::DesignError;
use thiserror::Error;

/// Failures of a CLI run, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable files, schema or positivity violations.
    #[error("{0}")]
    Input(String),
    /// Non-convergence, failed certification or a reproduction mismatch.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::NoConvergence { .. }
            | DesignError::EquivalenceCheckFailed { .. }
            | DesignError::SingularInformation
            | DesignError::DegenerateSample => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("invalid JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv output: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
