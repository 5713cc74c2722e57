use thiserror::Error;

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("solver: {0}")]
    Solver(String),
    /// A command ran to completion but its check failed (gradient audit).
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) | CliError::CheckFailed(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<ilploss::Error> for CliError {
    fn from(e: ilploss::Error) -> Self {
        use ilploss::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_) | E::Config(_) | E::DimensionMismatch { .. } => CliError::Usage(msg),
            E::DegenerateCost(_) | E::Generation(_) | E::Parse { .. } | E::Validation { .. } | E::Io(_) => {
                CliError::Data(msg)
            }
            E::Numeric { .. } => CliError::Numeric(msg),
            E::SolverUnavailable(_) | E::BudgetExceeded { .. } => CliError::Solver(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
