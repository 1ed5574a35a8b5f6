use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("arity mismatch: expected {expected}, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },

    #[error("arity {arity} exceeds the limit of {limit}")]
    ArityLimit { arity: usize, limit: usize },

    #[error("majority needs an odd positive arity, got {0}")]
    EvenMajority(usize),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("noise parameter {0} is outside [0, 1/2]")]
    NoiseOutOfRange(f64),

    #[error("{what} of size {size} exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("gate computes {found}, expected {expected}")]
    WrongTarget { expected: String, found: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
