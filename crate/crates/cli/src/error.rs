use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// An input file or an upstream stage's artifact is absent.
    #[error("missing {what}: {}", path.display())]
    Missing { what: String, path: PathBuf },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] entprobe::Error),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn missing(what: &str, path: impl Into<PathBuf>) -> Self {
        CliError::Missing {
            what: what.to_owned(),
            path: path.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        use entprobe::Error as E;
        match self {
            CliError::Missing { .. } => 2,
            CliError::Config(_) => 3,
            CliError::Core(E::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => 2,
            CliError::Core(
                E::Parse { .. } | E::Invalid(_) | E::DimensionMismatch { .. } | E::Json(_),
            ) => 3,
            CliError::Core(_) | CliError::Other(_) => 1,
        }
    }
}
