use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("value error: {0}")]
    Value(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid interval: lower {lower} > upper {upper}")]
    Interval { lower: f64, upper: f64 },

    #[error("relaxation error: {0}")]
    Relaxation(String),

    #[error("infeasible at center: |f(x0) - f'(x0)| = {gap} exceeds eps = {eps}")]
    InfeasibleAtCenter { gap: f64, eps: f64 },

    #[error("invalid query: {0}")]
    Query(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
