use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Dimensions of two operands do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// An input violates a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),
    /// The requested quantity is outside the hypotheses it is defined under.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A network or configuration document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("region enumeration exceeded its budget of {budget} nodes")]
    BudgetExceeded { budget: usize },
    #[error("linear program failed: {0}")]
    Lp(String),
    /// Two independently computed quantities disagree beyond tolerance.
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
