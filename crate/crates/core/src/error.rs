use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or inconsistent input data, files or configuration.
    Data,
    /// A numerical failure (non-finite loss, degenerate statistics).
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("payload must be exactly 112 bits, got {got}")]
    PayloadLength { got: usize },

    #[error("sample rate too low: {samples_per_pulse:.3} samples per 0.5 us pulse (need >= 2)")]
    SampleRateTooLow { samples_per_pulse: f64 },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("signal of length {len} is too short for {depth} pooling stages")]
    SignalTooShort { len: usize, depth: usize },

    #[error("batch-norm population of {population} is too small in train mode (need >= 2)")]
    DegenerateBatch { population: usize },

    #[error("backward called without a cached forward pass")]
    MissingCache,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("insufficient class data: {0}")]
    InsufficientClassData(String),

    #[error("no valid triplet: {0}")]
    NoValidTriplet(String),

    #[error("non-finite loss at {context}")]
    NonFiniteLoss { context: String },

    #[error("checkpoint does not match expected configuration: {0}")]
    ConfigMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("class {label} has a single sample; intra-class distance undefined")]
    SingletonClass { label: usize },

    #[error("need at least 2 classes, found {found}")]
    TooFewClasses { found: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFiniteLoss { .. } | Error::DegenerateBatch { .. } | Error::DegenerateData(_) => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Data,
        }
    }
}
