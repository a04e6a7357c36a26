//! Crate-wide error type.

use std::fmt;

/// Errors produced by plant construction, data handling, solvers, and I/O.
#[derive(Debug)]
pub enum Error {
    /// A physical or controller parameter violates its validity range.
    InvalidParameter(String),
    /// Mismatched or impossible array/matrix dimensions.
    Dimension(String),
    /// A numerical kernel failed (factorization, eigensolve, SVD).
    Numerical(String),
    /// The optimization loop did not produce a valid solution.
    Solver(String),
    /// Data collection could not produce usable excitation data.
    Collection(String),
    /// A configuration file could not be parsed.
    Config {
        /// 1-based line number when the failure is tied to a line.
        line: Option<usize>,
        message: String,
    },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Solver(msg) => write!(f, "solver error: {msg}"),
            Error::Collection(msg) => write!(f, "data collection error: {msg}"),
            Error::Config { line: Some(n), message } => {
                write!(f, "config error (line {n}): {message}")
            }
            Error::Config { line: None, message } => write!(f, "config error: {message}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
