use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in layer {layer}: {what}")]
    NonFinite { layer: usize, what: String },

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("IDX decode error at byte {offset}: {message}")]
    Idx { offset: usize, message: String },

    #[error("tabular parse error at row {row}: {message}")]
    Tabular { row: usize, message: String },

    #[error("checkpoint decode error at byte {offset}: {message}")]
    Checkpoint { offset: usize, message: String },

    #[error("experiment spec error: {0}")]
    Spec(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
