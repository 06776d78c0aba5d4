use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible domain (e.g. `b <= 1`).
    #[error("parameter out of domain: {0}")]
    Parameter(String),
    /// Sequence lengths disagree, or a required collection is empty.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A point or argument lies outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The model does not satisfy a filter's requirements (e.g. Landweber with `mu_1 > 1`).
    #[error("model error: {0}")]
    Model(String),
    /// A linear system could not be solved to the required accuracy.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The filter annihilates the whole spectrum, so normalised quantities are undefined.
    #[error("degenerate filter: {0}")]
    DegenerateFilter(String),
    /// An iterative solver stopped before meeting its tolerance.
    #[error("no convergence after {iterations} iterations (optimality {optimality:e})")]
    NoConvergence {
        iterations: usize,
        optimality: f64,
        /// Optimality measure sampled along the run.
        trace: Vec<f64>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(shape(alloc::format!(
            "{what}: expected length {want}, got {got}"
        )))
    }
}
