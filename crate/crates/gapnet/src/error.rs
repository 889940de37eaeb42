//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("sweep point (lambda={lambda}, lr={lr}, epochs={epochs}): {source}")]
    SweepPoint {
        lambda: f64,
        lr: f64,
        epochs: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    /// Attach a file path to a raw I/O error.
    pub fn io(path: impl AsRef<std::path::Path>, e: std::io::Error) -> Self {
        Error::Io(path.as_ref().display().to_string(), e)
    }
}
