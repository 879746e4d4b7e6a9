use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("pair is not reversible: {0}")]
    NotReversible(String),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error(
        "measure is not absolutely continuous: mass at state {0} where the reference has none"
    )]
    NotAbsolutelyContinuous(usize),
    #[error("kernel is not lazy at state {state}: P(x,x) = {diagonal}")]
    NotLazy { state: usize, diagonal: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("estimate carries no witness")]
    MissingWitness,
}

pub type Result<T> = std::result::Result<T, Error>;
