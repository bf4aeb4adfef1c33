use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid threshold set: {0}")]
    InvalidThresholds(String),

    #[error("bin {bin} has probability {probability:e}, below the floor {floor:e}")]
    DegenerateBin {
        bin: usize,
        probability: f64,
        floor: f64,
    },

    #[error("effective signal has zero energy")]
    ZeroSignal,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Numerical failures (as opposed to bad user input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::DegenerateBin { .. } | Error::ZeroSignal)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
