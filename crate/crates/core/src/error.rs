use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid base {0}: must be a prime")]
    InvalidBase(u64),
    #[error("invalid digit {digit} for base {base}")]
    InvalidDigit { digit: u32, base: u32 },
    #[error("base mismatch: {left} vs {right}")]
    BaseMismatch { left: u32, right: u32 },
    #[error("duplicate base {0}")]
    DuplicateBase(u32),
    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty point set")]
    EmptyPointSet,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{what} = {value} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        value: u128,
        cap: u128,
    },
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable short tag used in single-line CLI error messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBase(_) => "invalid-base",
            Error::InvalidDigit { .. } => "invalid-digit",
            Error::BaseMismatch { .. } => "base-mismatch",
            Error::DuplicateBase(_) => "duplicate-base",
            Error::Overflow(_) => "overflow",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::EmptyPointSet => "empty-point-set",
            Error::InvalidWeights(_) => "invalid-weights",
            Error::CapExceeded { .. } => "cap-exceeded",
            Error::OutOfRange(_) => "out-of-range",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
