use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("corrupt frame in {path}: {reason}")]
    CorruptFrame { path: PathBuf, reason: String },
    #[error("depth sequence contains no frames")]
    EmptySequence,
    #[error("field contains a non-finite value at index {0}")]
    NonFiniteField(usize),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image encoding failed for {path}: {reason}")]
    ImageFailure { path: PathBuf, reason: String },

    #[error("frame {index} out of range (sequence has {len} frames)")]
    FrameOutOfRange { index: usize, len: usize },
    #[error("no labelled training data")]
    NoTrainingData,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite feature at frame {frame}, component {component}")]
    NonFiniteFeature { frame: usize, component: usize },

    #[error("background removal left no foreground pixels")]
    NoForeground,
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("score vector sums to zero")]
    ZeroVector,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("no training examples for class {class} in channel {channel}")]
    MissingClassExamples { channel: String, class: usize },
    #[error("missing scores for segment {segment_id}, channel {channel}")]
    MissingScores { segment_id: String, channel: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.to_string(),
        }
    }

    /// Short machine-readable tag, used in manifests for failed work items.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::MissingPath(_) => "MissingPath",
            Error::CorruptFrame { .. } => "CorruptFrame",
            Error::EmptySequence => "EmptySequence",
            Error::NonFiniteField(_) => "NonFiniteField",
            Error::IoFailure { .. } => "IoFailure",
            Error::ImageFailure { .. } => "ImageFailure",
            Error::FrameOutOfRange { .. } => "FrameOutOfRange",
            Error::NoTrainingData => "NoTrainingData",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteFeature { .. } => "NonFiniteFeature",
            Error::NoForeground => "NoForeground",
            Error::TooFewFrames { .. } => "TooFewFrames",
            Error::ZeroVector => "ZeroVector",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::MissingClassExamples { .. } => "MissingClassExamples",
            Error::MissingScores { .. } => "MissingScores",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Format { .. } => "Format",
        }
    }
}
