use thiserror::Error;

#[derive(Debug, Error)]
pub enum QremError {
    #[error("dimension N = {0} outside 1..=30")]
    DimensionOutOfRange(usize),
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size cap exceeded: {what} = {value} > {cap}")]
    SizeCap {
        what: &'static str,
        value: usize,
        cap: usize,
    },
    #[error("energy {energy} is not below the spectrum ({detail})")]
    EnergyInSpectrum { energy: f64, detail: String },
    #[error("bisection bracket failure: {0}")]
    Bracket(String),
    #[error("malformed disorder file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QremError>;
