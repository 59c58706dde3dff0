use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of a command, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] membrane_core::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("selftest: {0} check(s) failed")]
    Selftest(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 1 for bad input, 2 for numerical failure, 3 for a failed selftest.
    pub fn exit_code(&self) -> i32 {
        use membrane_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Checkpoint(_) => 1,
            CliError::Core(
                E::InvalidGrid(_)
                | E::InvalidParams(_)
                | E::InvalidFlowParams(_)
                | E::InvalidCapSet(_)
                | E::GridMismatch
                | E::ConstraintViolation { .. },
            ) => 1,
            CliError::Core(_) | CliError::Numerical(_) => 2,
            CliError::Selftest(_) => 3,
        }
    }
}
