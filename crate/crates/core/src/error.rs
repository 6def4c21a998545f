use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),

    #[error("zero range: cannot normalize a constant trace")]
    ZeroRange,

    #[error("too short: {what} needs at least {needed} samples, got {got}")]
    TooShort {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("misaligned traces: {0}")]
    Misaligned(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("singular normal equations (rank-deficient inputs with zero ridge)")]
    Singular,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParam(msg.into())
}
