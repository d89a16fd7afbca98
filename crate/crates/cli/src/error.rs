use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Core(#[from] qdt_core::Error),
}

impl CliError {
    /// 0 success, 2 configuration, 3 IO or integrity, 4 pipeline precondition.
    pub fn exit_code(&self) -> i32 {
        use qdt_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Integrity(_) => 3,
            CliError::Precondition(_) => 4,
            CliError::Core(e) => match e {
                E::RankDeficient { .. }
                | E::EmptyTraining(_)
                | E::InsufficientSamples { .. }
                | E::Solver(_)
                | E::ProbabilitySum { .. } => 4,
                _ => 2,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
