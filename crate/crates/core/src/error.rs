use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("value {value} outside [0, {h}]")]
    OutOfRange { value: f64, h: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no samples supplied")]
    NoSamples,

    #[error("instance too large: {size} exceeds limit {limit}")]
    InstanceTooLarge { size: u128, limit: u128 },

    #[error("auction is not ε-coarse: bidder {bidder} has a breakpoint at {breakpoint} off the grid")]
    NotCoarse { bidder: usize, breakpoint: f64 },

    #[error("monotonicity violated for bidder {bidder}")]
    MonotonicityViolated { bidder: usize },

    #[error("insufficient samples for {what}: required {required}, available {available}")]
    InsufficientSamples {
        what: &'static str,
        required: u64,
        available: u64,
    },

    #[error("random bit budget exhausted after {consumed} bits")]
    BitsExhausted { consumed: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("csv error at row {row}, column {column}: {msg}")]
    Csv {
        row: usize,
        column: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
