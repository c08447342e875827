use std::path::PathBuf;

use manifold_sysid_core::Error as CoreError;

use crate::io::CheckpointKind;

pub type Result<T, E = SysidError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SysidError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed document {}: {source}", path.display())]
    Malformed {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: CheckpointKind,
        found: CheckpointKind,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl SysidError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SysidError::Core(
                CoreError::Diverged { .. } | CoreError::NonFinite(_) | CoreError::OptimizerAborted { .. },
            ) => 2,
            SysidError::NonFinite(_) => 2,
            _ => 1,
        }
    }
}
