use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    /// Header-level CSV problems: missing label column, duplicate names.
    #[error("{}: schema error: {msg}", path.display())]
    Schema { path: PathBuf, msg: String },

    /// A bad cell. `row` is 1-based and excludes the header.
    #[error("{}: data error at row {row}, column {column}: {msg}", path.display())]
    Data {
        path: PathBuf,
        row: usize,
        column: String,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Taxonomy {
        path: PathBuf,
        source: flowsentinel_core::Error,
    },

    #[error("{}: format error: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] flowsentinel_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
