use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{value} is outside the range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("QP solver stopped after {iterations} iterations without converging")]
    SolverFailure { iterations: usize, best: Vec<f64> },

    #[error("QP is infeasible")]
    Infeasible,

    #[error("invalid scenario: {0}")]
    Validation(String),
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
