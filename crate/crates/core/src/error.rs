use thiserror::Error;

/// Errors produced by the library and surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular channel: {0}")]
    SingularChannel(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Even activating every antenna violates the per-antenna cap.
    #[error("per-antenna power constraint cannot be met with {m} antennas; at least {min_feasible_m} are required")]
    PowerConstraint { m: usize, min_feasible_m: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance too large for the brute-force oracle: {0}")]
    OracleSize(String),

    #[error("division by zero consumption: {0}")]
    ZeroConsumption(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) | Error::PowerConstraint { .. } => 2,
            Error::Validation(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
