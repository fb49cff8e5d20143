use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("design points {0} and {1} are identical")]
    DuplicateRows(usize, usize),

    #[error("need at least as many design points as parameters (n = {n}, d = {d})")]
    TooFewPoints { n: usize, d: usize },

    #[error("information weight at point {index} is not a positive finite number (eta = {eta})")]
    BadWeight { index: usize, eta: f64 },

    #[error("expansion too large: {subsets} subsets exceeds the limit of {limit}")]
    ExpansionTooLarge { subsets: u128, limit: u128 },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("rank of X is {rank}, expected {expected}; reparametrize the model")]
    RankDeficient { rank: usize, expected: usize },

    #[error("residual undefined at boundary: p[{0}] = 0")]
    BoundaryAllocation(usize),

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("unsupported problem shape: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, DesignError>;
