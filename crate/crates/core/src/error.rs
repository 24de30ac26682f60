use thiserror::Error;

#[derive(Debug, Error)]
pub enum OlpsError {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// An iterative solver ran out of iterations. `best` is the best iterate found.
    #[error("{solver} did not converge after {iterations} iterations")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        best: Vec<f64>,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("strategy contract violated at period {period}: {reason}")]
    ContractViolation { period: usize, reason: String },

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("invalid parameter `{key}` for `{strategy}`: {reason}")]
    Parameter {
        strategy: String,
        key: String,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OlpsError>;

pub(crate) fn argument(msg: impl Into<String>) -> OlpsError {
    OlpsError::Argument(msg.into())
}
