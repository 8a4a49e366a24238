//! Error type shared across the crate.

use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A vector or matrix dimension did not match what the operation expects.
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A NaN or infinity reached an operation that requires finite input.
    NonFinite { context: &'static str },
    /// Text could not be parsed; `position` is a byte offset into the input.
    Parse { position: usize, message: String },
    /// A configuration value is invalid or inconsistent.
    InvalidConfig(String),
    /// An operation that needs stored records found none.
    EmptyBuffer,
    /// Exhaustive enumeration was requested beyond the supported size.
    EnumerationBound { m: usize, limit: usize },
    /// Correlation is undefined because one input series has zero variance.
    ZeroVariance,
    /// A transport-level failure talking to an external evaluator.
    Transport(String),
    /// The peer violated the wire protocol; `raw` is the offending line.
    Protocol { message: String, raw: String },
    Io(std::io::Error),
    Json(serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                context,
                expected,
                actual,
            } => write!(f, "shape mismatch in {context}: expected {expected}, got {actual}"),
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::Parse { position, message } => {
                write!(f, "parse error at index {position}: {message}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::EmptyBuffer => write!(f, "replay buffer is empty"),
            Error::EnumerationBound { m, limit } => {
                write!(f, "enumeration over m={m} exceeds the bound m<={limit}")
            }
            Error::ZeroVariance => write!(f, "correlation undefined: zero variance"),
            Error::Transport(msg) => write!(f, "transport error: {msg}"),
            Error::Protocol { message, raw } => {
                write!(f, "protocol error: {message} (line: {raw:?})")
            }
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
