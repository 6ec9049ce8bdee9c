use std::path::{Path, PathBuf};

use hairfit_core::fit::FitError;

/// Failure inside a single file format reader or writer.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

impl FormatError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        FormatError::Invalid(msg.into())
    }

    /// Short reads surface as truncation rather than a bare IO error.
    pub(crate) fn truncated(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            FormatError::invalid("truncated file")
        } else {
            FormatError::Io(e)
        }
    }
}

/// A configuration value that fails its precondition, named by its dotted key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: FormatError },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("numeric abort: {0}")]
    Numeric(FitError),
}

impl Error {
    pub fn file(path: &Path, source: FormatError) -> Self {
        Error::File { path: path.to_path_buf(), source }
    }

    pub fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        Error::Stage { stage, message: e.to_string() }
    }

    /// Process exit code: 2 configuration, 3 input, 4 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigFile { .. } => 2,
            Error::File { .. } | Error::Stage { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }
}

impl From<FitError> for Error {
    fn from(e: FitError) -> Self {
        match e {
            FitError::NonFinite { .. } => Error::Numeric(e),
            FitError::InvalidConfig(msg) => Error::Config(ConfigError::new("fit", msg)),
            FitError::InvalidSchedule => Error::Config(ConfigError::new("prior", "invalid noise schedule")),
            other => Error::stage("fit", other),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
