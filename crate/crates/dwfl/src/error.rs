//! Error types shared across the crate.

use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum DwflError {
    /// Invalid model or experiment configuration (bad dimensions, out-of-range
    /// hyperparameters, unknown config keys, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor dimension mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// An API was called in an unsupported order (stale cache, missing state).
    #[error("usage error: {0}")]
    Usage(String),

    /// Empty or otherwise unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// Sequences in a corpus do not share one aligned length.
    #[error("alignment error: sequences are not aligned to one length; offending ids: {0:?}")]
    Alignment(Vec<String>),

    /// Client weight sets cannot be combined.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    /// A federated round could not produce a global model.
    #[error("federation error: {0}")]
    Federation(String),

    /// A metric is undefined for the given inputs.
    #[error("metric error: {0}")]
    Metric(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Malformed or incompatible checkpoint / dataset container.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DwflError {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DwflError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, DwflError>;
