//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: lhs {lhs:?}, rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: Option<(usize, usize)>,
    },
    #[error("index {index} out of range in {op} (extent {extent})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarBackward { shape: (usize, usize) },
    #[error("backward called twice on the same loss without a new forward pass")]
    DoubleBackward,
    #[error("non-finite gradient for parameter `{name}`")]
    NonFiniteGrad { name: String },
    #[error("non-finite values produced by {context}")]
    NonFinite { context: String },
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("feature dimension mismatch: {lhs} vs {rhs}")]
    DimMismatch { lhs: usize, rhs: usize },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, partition {partition}: {message}")]
    Diverged {
        epoch: usize,
        partition: usize,
        message: String,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("evaluation error: {0}")]
    Eval(String),
}
