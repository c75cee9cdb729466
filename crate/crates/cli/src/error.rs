use std::path::PathBuf;

use thiserror::Error;

/// Failure categories mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or unreadable input: exit 2.
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An experiment ran but a check or invariant failed: exit 1.
    #[error("{0}")]
    Failed(String),

    #[error(transparent)]
    Core(#[from] realm_core::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use realm_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidConfig(_)
                | E::Parse { .. }
                | E::Json(_)
                | E::VoltageOutOfRange { .. }
                | E::InvalidMatrix(_)
                | E::DimensionMismatch(_)
                | E::InnerDimTooLarge { .. }
                | E::ArrayOverflow { .. }
                | E::FreqTooLarge { .. } => 2,
                _ => 1,
            },
            CliError::Failed(_) | CliError::Write { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
