use thiserror::Error;

/// Errors produced across the library.
///
/// `kind()` groups them into the three classes the CLI maps to exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("too few rows: need at least 2, got {0}")]
    TooFewRows(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("empty fold {0}")]
    EmptyFold(usize),
    #[error("partition leaves no training rows outside fold {0}")]
    FoldLeavesNothing(usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("weights sum to {0}, expected 1")]
    WeightSumError(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("fitted values missing from residual bundle")]
    MissingFittedValues,
    #[error("invalid residual bundle: {0}")]
    InvalidBundle(String),
    #[error("loss is not non-decreasing: {0}")]
    NonMonotoneLoss(String),
    #[error("residuals are not integer-valued (index {0})")]
    NonIntegerResiduals(usize),
    #[error("function has no finite bounds")]
    UnboundedLoss,
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("inner sample size must be at least 2, got {0}")]
    InnerTooSmall(usize),
    #[error("io error: {0}")]
    Io(String),
}

/// Coarse classification used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::InvalidTolerance(_) | Error::InnerTooSmall(_) => {
                ErrorKind::Usage
            }
            Error::DegenerateFit(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
