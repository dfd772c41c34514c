use std::path::PathBuf;

use wienerlab_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Format { .. } | Self::Data(_) | Self::Io { .. } => exit::DATA,
            Self::Numerical(_) => exit::NUMERICAL,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<CoreError> for LabError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(m) => Self::Config(m),
            CoreError::OracleTooLarge { .. } => Self::Config(e.to_string()),
            CoreError::Numerical(m) => Self::Numerical(m),
            CoreError::Singular | CoreError::UndefinedQuotient => Self::Numerical(e.to_string()),
            CoreError::Shape(_) | CoreError::UnsupportedRank(_) | CoreError::InvalidInput(_) => {
                Self::Data(e.to_string())
            }
        }
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        Self::Data(e.to_string())
    }
}
