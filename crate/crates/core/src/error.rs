use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("domain too large: {0}")]
    TooLarge(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("undefined conditional: x = {0} has zero marginal mass")]
    UndefinedConditional(u64),
    #[error("support violation at index {0}: q is zero where p is positive")]
    SupportViolation(usize),
    #[error("empty support overlap between the two distributions")]
    EmptyOverlap,
    #[error("candidate cap of {0} exceeded")]
    CandidateCap(u64),
    #[error("no trials")]
    NoTrials,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("strategy output {output:#b} for input {input:#b} is at distance {distance} > {bound}")]
    DistanceViolation {
        input: u64,
        output: u64,
        distance: usize,
        bound: usize,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
