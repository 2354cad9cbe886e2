//! Errors of CLI commands and their exit codes.

use std::path::PathBuf;

/// A failed command. The exit code tells the kind of failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("FileNotFound: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    /// 1 runtime or verification failure, 2 usage or I/O, 3 parse or
    /// validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::FileNotFound(_) | CliError::Io { .. } | CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::FileNotFound(path)
        } else {
            CliError::Io { path, source }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
