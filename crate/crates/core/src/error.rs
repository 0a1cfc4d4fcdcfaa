use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed arguments: wrong dimensions, non-finite entries, non-unit directions.
    #[error("invalid input: {0}")]
    Input(String),

    /// Arguments outside the domain of the operation (singular matrix, violated precondition).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e}) on matrix {matrix}")]
    NoConvergence {
        sweeps: usize,
        off_norm: f64,
        matrix: DMatrix<f64>,
    },

    /// Two routes that must agree did not.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
