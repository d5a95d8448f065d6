use alloc::string::String;
use core::fmt;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Tensor shapes do not line up.
    Dimension(String),
    /// Inputs violate a documented precondition.
    Validation(String),
    /// Architecture or training configuration is unusable.
    Config(String),
    /// A raw label is not covered by the taxonomy, or a rule is malformed.
    Taxonomy(String),
    /// An internal bookkeeping invariant was broken.
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Validation(m) => write!(f, "validation error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Taxonomy(m) => write!(f, "taxonomy error: {m}"),
            Error::Internal(m) => write!(f, "internal invariant violated: {m}"),
        }
    }
}

impl core::error::Error for Error {}
