use thiserror::Error;

/// Error variants shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input (dimension mismatch, bad weights, non-finite entries, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    DomainError(String),

    /// An iterative numerical routine failed to reach its tolerance.
    #[error("numerical error: {0}")]
    NumericalError(String),

    /// Armijo backtracking shrank the step below the admissible range.
    #[error("stepsize failure: {0}")]
    StepsizeFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
