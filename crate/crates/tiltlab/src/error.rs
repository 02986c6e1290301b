use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("rejection budget of {attempts} attempts exhausted")]
    AttemptsExhausted { attempts: u64 },
    #[error("domain needs at least 3 grid points, got {0}")]
    DomainTooSmall(usize),
    #[error("time {0} lies outside the grid")]
    OutOfGrid(f64),
    #[error("index {index} out of range {lo}..={hi}")]
    IndexOutOfRange { index: i64, lo: i64, hi: i64 },
    #[error("boundary scheme not usable here: {0}")]
    InvalidScheme(String),
    #[error("ordering violated: {0}")]
    OrderingViolated(String),
    #[error("empty sample")]
    EmptySample,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
