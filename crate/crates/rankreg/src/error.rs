use thiserror::Error;

/// Errors produced by the rankreg library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The regularizer was asked to score a batch without a single positive
    /// sample. Callers normally guarantee positives via the buffer.
    #[error("no positive samples in batch")]
    NoPositives,

    /// Rank-order metrics need at least one positive and one negative label.
    #[error("degenerate labels: need at least one positive and one negative")]
    DegenerateLabels,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
