use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coordinate ({x}, {y}) outside {width}x{height} grid")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("depth at ({x}, {y}) must be positive and finite, got {value}")]
    NonPositiveDepth { x: usize, y: usize, value: f64 },
    #[error("duplicate coordinate ({x}, {y})")]
    DuplicateCoordinate { x: usize, y: usize },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("invalid specification: {0}")]
    BadSpec(String),
    #[error("requested {requested} pixels but only {available} are valid")]
    NotEnoughPixels { requested: usize, available: usize },
    #[error("prior has no valid pixels")]
    EmptyPrior,
    #[error("affine fit needs at least one sample")]
    NoSamples,
    #[error("cannot normalize a constant map")]
    Degenerate,
    #[error("no valid values")]
    Empty,
    #[error("invalid range: min {min} must be below max {max}")]
    BadRange { min: f64, max: f64 },
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("non-positive value {value} at ({x}, {y}) in log metric")]
    NonPositiveValue { x: usize, y: usize, value: f64 },
    #[error("bad PFM header: {0}")]
    BadHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("unsupported channel layout: {0}")]
    UnsupportedChannels(String),
    #[error("bad image: {0}")]
    BadImage(String),
    #[error("depth scale must be positive, got {0}")]
    NonPositiveScale(f64),
}

impl Error {
    /// Stable variant name, used on the command line to report the failure kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::NonPositiveDepth { .. } => "NonPositiveDepth",
            Error::DuplicateCoordinate { .. } => "DuplicateCoordinate",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::BadGrid(_) => "BadGrid",
            Error::BadSpec(_) => "BadSpec",
            Error::NotEnoughPixels { .. } => "NotEnoughPixels",
            Error::EmptyPrior => "EmptyPrior",
            Error::NoSamples => "NoSamples",
            Error::Degenerate => "Degenerate",
            Error::Empty => "Empty",
            Error::BadRange { .. } => "BadRange",
            Error::EmptyEvaluationSet => "EmptyEvaluationSet",
            Error::NonPositiveValue { .. } => "NonPositiveValue",
            Error::BadHeader(_) => "BadHeader",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::UnsupportedChannels(_) => "UnsupportedChannels",
            Error::BadImage(_) => "BadImage",
            Error::NonPositiveScale(_) => "NonPositiveScale",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn bad_spec(msg: impl Into<String>) -> Error {
    Error::BadSpec(msg.into())
}
