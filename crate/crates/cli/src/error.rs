use std::path::PathBuf;

use stgp_core::error::StgpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("cannot {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what} in {path}: {reason}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("missing inputs:\n  {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n  "))]
    Missing(Vec<PathBuf>),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Model(#[from] StgpError),
}

impl CliError {
    /// 2 usage, 3 I/O, 4 validation failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Model(StgpError::InvalidParameter { .. }) => 2,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Missing(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Model(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err<'a>(
    action: &'static str,
    path: &'a std::path::Path,
) -> impl FnOnce(std::io::Error) -> CliError + 'a {
    move |source| CliError::Io {
        action,
        path: path.to_path_buf(),
        source,
    }
}
