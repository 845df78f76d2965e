//! Library surface of the command-line front-end: CSV ingestion, the sidecar
//! schema format, the versioned model artifact, cross-validation, and the
//! command implementations. The `cpreg` binary is a thin wrapper over
//! [`commands`].

pub mod artifact;
pub mod commands;
pub mod cv;
pub mod dataset;
pub mod error;
pub mod ingest;
pub mod schema_file;

pub use error::{CliError, Result};
