use std::path::PathBuf;

use mic_core::Error as ModelError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CliError {
    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data { .. } | Self::Parse { .. } | Self::Io { .. } => EXIT_DATA,
            Self::Model(e) => match e {
                ModelError::InvalidConfig(_) => EXIT_USAGE,
                ModelError::TimeReversal { .. }
                | ModelError::StaleState { .. }
                | ModelError::UserOutOfRange { .. }
                | ModelError::CascadeOutOfRange { .. }
                | ModelError::InvalidEvent { .. }
                | ModelError::InvalidParams(_)
                | ModelError::DimensionMismatch(_)
                | ModelError::InvalidWindow { .. }
                | ModelError::LogTooSmall(_) => EXIT_DATA,
                ModelError::ImpossibleEvent { .. }
                | ModelError::NonFinite(_)
                | ModelError::Singular { .. }
                | ModelError::Unstable { .. }
                | ModelError::SolverFailure { .. }
                | ModelError::UndefinedCorrelation
                | ModelError::IntegrationFailure { .. } => EXIT_NUMERICAL,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
