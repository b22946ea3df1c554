//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: left {left:?} vs right {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid axis {axis} for rank-{rank} tensor")]
    InvalidAxis { axis: usize, rank: usize },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("graph already consumed by a previous backward pass")]
    GraphConsumed,

    #[error("non-finite value in {what} at coordinate {index}")]
    NonFinite { what: String, index: usize },

    #[error("{what}: extent {extent} along axis {axis} is not divisible by {divisor}; pad the input first")]
    NotDivisible {
        what: &'static str,
        axis: usize,
        extent: usize,
        divisor: usize,
    },

    #[error("kernel {kernel:?} larger than padded input {input:?}")]
    KernelTooLarge {
        kernel: Vec<usize>,
        input: Vec<usize>,
    },

    #[error("batch norm used in eval mode before any training step initialized its statistics")]
    UninitializedBatchNorm,

    #[error("empty slice sequence")]
    EmptySequence,

    #[error("{0}")]
    Validation(String),

    #[error("mask contains a single class; distance maps need both foreground and background")]
    SingleClassMask,

    #[error("skeleton volume is not unit-width at voxel ({0}, {1}, {2}); thin it first")]
    NotThin(usize, usize, usize),

    #[error("point set '{0}' is empty")]
    EmptyPointSet(&'static str),

    #[error("training diverged: non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("non-finite gradient for parameter '{0}'")]
    NonFiniteGradient(String),

    #[error("every threshold in the grid produced an empty skeleton; the network likely needs retraining")]
    AllThresholdsEmpty,

    #[error("unknown config key '{key}'; accepted keys: {accepted}")]
    UnknownConfigKey { key: String, accepted: String },

    #[error("config key '{key}': {reason}")]
    BadConfigValue { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code per CLI convention: 2 validation, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::UnknownConfigKey { .. }
            | Error::BadConfigValue { .. }
            | Error::ShapeMismatch { .. }
            | Error::InvalidAxis { .. }
            | Error::NotDivisible { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
