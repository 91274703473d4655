use orbitflow_core::{Error, ErrorKind};
use thiserror::Error;

/// Failures of a CLI run, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config schema: {0}")]
    Schema(String),

    #[error("config invalid:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<crate::validate::Violation>),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Invalid(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Refusal => 3,
                ErrorKind::Budget => 4,
            },
        }
    }
}
