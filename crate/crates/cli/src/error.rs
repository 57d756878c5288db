use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the command-line harness, each tied to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// A file could not be parsed; `message` carries line or field details.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Model(#[from] trialoffer::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Verification(String),
}

pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Parse { .. } | CliError::Config { .. } | CliError::Model(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::io(path, source),
            other => {
                let at = line.map(|l| format!("line {l}: ")).unwrap_or_default();
                CliError::parse(path, format!("{at}{other:?}"))
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
