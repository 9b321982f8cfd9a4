use modcap_core::model::SolveStatus;
use modcap_core::Error;

/// Command failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input or configuration.
    #[error("{0}")]
    Validation(String),
    /// Missing backend, unreadable or unwritable files.
    #[error("{0}")]
    Environment(String),
    /// A limit was hit before feasible bounds existed.
    #[error("{0}")]
    Limit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Environment(_) => 2,
            CliError::Limit(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Backend(_) => CliError::Environment(e.to_string()),
            Error::Solver {
                status: SolveStatus::Limit,
                ..
            } => CliError::Limit(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Environment(format!("{}: {e}", path.display()))
}
