use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("softmax over an all-masked input")]
    AllMasked,

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("non-finite value in parameter `{0}`")]
    NonFinite(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layout syntax error at {pos}: {msg}")]
    LayoutSyntax { pos: usize, msg: String },

    #[error("layout type error at {path}: expected {expected}, got {actual}")]
    LayoutType {
        path: String,
        expected: String,
        actual: String,
    },

    #[error("uncompilable question: {0}")]
    Uncompilable(String),

    #[error("malformed dependency parse at line {line}: {msg}")]
    DepParse { line: usize, msg: String },

    #[error("module failure at layout path {path}: {source}")]
    Module {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("index file error: {0}")]
    IndexFile(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips `Module` wrappers to reach the originating error.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Module { source, .. } => source.root_cause(),
            other => other,
        }
    }
}
