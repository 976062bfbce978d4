use std::path::PathBuf;

use strata_bounds_core::Error as CoreError;

/// Errors surfaced by the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Malformed or invalid input; `location` points at the offending line
    /// or field.
    #[error("{location}: {message}")]
    Input { location: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn input(location: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Input {
            location: location.into(),
            message: message.into(),
        }
    }

    /// 2 for problems with the user's input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Input { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
