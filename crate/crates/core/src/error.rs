use thiserror::Error;

/// Errors produced by the reachability engine and its tooling.
#[derive(Debug, Error)]
pub enum ReachError {
    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    Dimension {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The analysis cannot proceed with the requested parameters (e.g. the
    /// interval exponential series does not converge for the step size).
    #[error("analysis error: {message} (hint: {hint})")]
    Analysis { message: String, hint: String },

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReachError>;

impl ReachError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        ReachError::InvalidInput(msg.into())
    }

    pub(crate) fn dim(op: &'static str, expected: usize, actual: usize) -> Self {
        ReachError::Dimension {
            op,
            expected,
            actual,
        }
    }
}

pub(crate) fn check_dim(op: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(ReachError::dim(op, expected, actual))
    }
}
