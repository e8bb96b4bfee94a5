use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible operand shapes; `op` names the offending operation.
    #[error("dimension mismatch in `{op}`: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("input `{0}` has no binding")]
    MissingBinding(String),

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("tokens missing from embedding table: {}", .0.join(", "))]
    Vocabulary(Vec<String>),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("duplicate id `{0}`")]
    IdCollision(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("no image found for ids: {}", .0.join(", "))]
    MissingImages(Vec<String>),

    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },

    #[error("malformed embedding file at line {line}: {message}")]
    Embedding { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
