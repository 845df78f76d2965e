//! Error type for the command-line layer, with stable exit codes:
//! 2 usage, 3 data, 4 numeric failure.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    SchemaFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: row {row}, column '{column}': {message}")]
    Data {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{path}: {message}")]
    DataFile { path: PathBuf, message: String },
    #[error("model file {path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error("numeric failure: {0}")]
    Numeric(cpreg_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::SchemaFile { .. }
            | CliError::Data { .. }
            | CliError::DataFile { .. }
            | CliError::Artifact { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<cpreg_core::Error> for CliError {
    fn from(e: cpreg_core::Error) -> Self {
        CliError::Numeric(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
