//! Error type shared by the numeric core.

use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A cell index component fell outside its mode's alphabet.
    IndexOutOfBounds {
        mode: usize,
        index: usize,
        bound: usize,
    },
    /// A vector or index tuple had the wrong length for the operation.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// Fewer distinct sample values than requested quantizer levels.
    DegenerateCodebook { distinct: usize, requested: usize },
    /// An operation that requires data received none.
    EmptyInput(&'static str),
    /// A non-finite value appeared where a finite one is required.
    NonFinite(&'static str),
    /// A prediction query marked a mode missing without a marginal for it.
    MissingMarginal { mode: usize },
    /// The dataset is too small for the requested partition.
    DatasetTooSmall { needed: usize, got: usize },
    /// A brute-force oracle refused an instance above its size guard.
    SizeGuard { cells: usize, limit: usize },
    /// A configuration parameter was outside its documented range.
    InvalidParameter(&'static str),
    /// A response vector did not match the model's output count.
    ResponseLengthMismatch { expected: usize, got: usize },
    /// Every solver restart diverged to non-finite values.
    AllRestartsDiverged,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IndexOutOfBounds { mode, index, bound } => write!(
                f,
                "index {index} out of range for mode {mode} (alphabet size {bound})"
            ),
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => {
                write!(f, "{what}: expected length {expected}, got {got}")
            }
            Error::DegenerateCodebook {
                distinct,
                requested,
            } => write!(
                f,
                "cannot place {requested} quantizer levels over {distinct} distinct values"
            ),
            Error::EmptyInput(what) => write!(f, "{what} must be non-empty"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::MissingMarginal { mode } => {
                write!(
                    f,
                    "no marginal distribution available for missing mode {mode}"
                )
            }
            Error::DatasetTooSmall { needed, got } => {
                write!(
                    f,
                    "dataset too small: need at least {needed} samples, got {got}"
                )
            }
            Error::SizeGuard { cells, limit } => {
                write!(
                    f,
                    "instance with {cells} cells exceeds oracle size guard {limit}"
                )
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::ResponseLengthMismatch { expected, got } => {
                write!(
                    f,
                    "response length {got} does not match output count {expected}"
                )
            }
            Error::AllRestartsDiverged => {
                write!(f, "every solver restart diverged to non-finite values")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
