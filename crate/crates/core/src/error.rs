use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate cost vector (norm {0:e})")]
    DegenerateCost(f64),

    #[error("numeric failure{}: {what}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Numeric { row: Option<usize>, what: String },

    #[error("enumeration budget exceeded: {points:e} points > {budget}; use branch-and-bound instead")]
    BudgetExceeded { points: f64, budget: u64 },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("validation error at sample {index}: {msg}")]
    Validation { index: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver unavailable: {0}")]
    SolverUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(row: Option<usize>, what: impl Into<String>) -> Self {
        Error::Numeric { row, what: what.into() }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
