use std::path::Path;

use randmeas::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status; see the README for the table.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                Error::QubitMismatch { .. } | Error::InvalidArgument(_) | Error::Parse(_) => 2,
                Error::SizeCap { .. } => 3,
                Error::Io(_) | Error::Malformed(_) | Error::SchemaVersion { .. } => 4,
                Error::ProtocolViolation(_) => 5,
                Error::NoData { .. } | Error::Incompatible { .. } => 6,
                Error::Invariant(_) => 7,
                Error::NonPositive { .. } => 8,
            },
        }
    }
}
