use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("lattice mismatch: {0} vs {1}")]
    LatticeMismatch(usize, usize),

    #[error("invalid lattice size {0}")]
    InvalidSize(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unbalanced syndrome: total charge {0}")]
    UnbalancedSyndrome(i64),

    #[error("worm exceeded the step cap of {cap} head moves")]
    StepCapExceeded { cap: u64 },

    #[error("flow problem infeasible: {0}")]
    Infeasible(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("identity only holds on the Nishimori line (alpha = {alpha}, beta = {beta})")]
    OffNishimoriLine { alpha: f64, beta: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
