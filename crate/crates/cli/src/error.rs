use std::path::Path;

/// Failure of a pipeline command. User errors (bad input, missing or stale
/// artifacts) exit with 2, everything else with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn is_user(&self) -> bool {
        matches!(self, CliError::User(_))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn user(msg: impl Into<String>) -> CliError {
    CliError::User(msg.into())
}

pub fn internal(msg: impl Into<String>) -> CliError {
    CliError::Internal(msg.into())
}

/// Missing or unreadable inputs are the caller's problem; other i/o
/// failures are not.
pub fn io(path: &Path, e: std::io::Error) -> CliError {
    let msg = format!("{}: {e}", path.display());
    match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied | std::io::ErrorKind::InvalidData => user(msg),
        _ => internal(msg),
    }
}
