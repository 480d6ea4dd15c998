use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degree {degree} outside 1..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty collection")]
    Empty,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("linear solve for column {column} ill-conditioned (condition number {condition:e})")]
    IllConditioned { column: usize, condition: f64 },
    #[error("repeated root: minimum gap {gap:e} below tolerance")]
    RepeatedRoot { gap: f64 },
    #[error("L = {l} too large for permutation enumeration (max {max})")]
    TooManyPermutations { l: usize, max: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("filter diverged at step {step}")]
    Diverged { step: usize },
    #[error("record carries no ground-truth labels")]
    MissingLabels,
    #[error("all likelihoods are zero")]
    ZeroLikelihood,
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
