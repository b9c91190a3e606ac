use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("timestamp out of order at edge {index}: {time} follows {previous}")]
    OutOfOrder { index: usize, previous: f64, time: f64 },

    #[error("edge {index} references node {node} but node_count is {node_count}")]
    DanglingNode {
        index: usize,
        node: usize,
        node_count: usize,
    },

    #[error("invalid timestamp {time} at edge {index}")]
    InvalidTimestamp { index: usize, time: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("training error: {0}")]
    Training(String),

    #[error("gradient check error: {0}")]
    Check(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("injection error: {0}")]
    Injection(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
