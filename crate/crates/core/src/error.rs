use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("channel is not ({epsilon}, {delta})-DP: reconstruction error {error:e}")]
    DecompositionInfeasible { epsilon: f64, delta: f64, error: f64 },

    #[error("{n} users cannot be split evenly into {groups} groups")]
    Divisibility { n: usize, groups: usize },

    #[error("incompatible input: {0}")]
    Incompatible(String),

    #[error("support mismatch: {left} vs {right} outcomes")]
    SupportMismatch { left: usize, right: usize },

    #[error("{corrupted} corrupted users exceeds {users} users")]
    TooManyCorrupted { corrupted: usize, users: usize },

    #[error("threshold mean {0} exceeds 1")]
    MeanOutOfRange(f64),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
