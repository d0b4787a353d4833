use alloc::string::String;
use core::fmt;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid configuration (bad bounds, infeasible geometry, bad ranges).
    Config(String),
    /// Invalid input data (empty datasets, bad labels, horizon overruns).
    Input(String),
    /// Structurally invalid formula for the requested operation.
    Structure(String),
    /// Mathematical domain violation (all-zero weights, division by zero).
    Domain(String),
    /// Non-finite value encountered during optimization.
    NonFinite { epoch: usize, batch: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Structure(msg) => write!(f, "structural error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::NonFinite { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
        }
    }
}

#[cfg(any(test, feature = "std"))]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
