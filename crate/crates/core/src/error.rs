use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: estimate {estimate:e}, achieved error {achieved:e}, requested {requested:e}")]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("normalization check failed: integral {integral} differs from {expected} by more than {tolerance:e}")]
    Normalization {
        integral: f64,
        expected: f64,
        tolerance: f64,
    },

    #[error("truncation region is infeasible: kept probability {kept_probability:e}")]
    InfeasibleRegion { kept_probability: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("selected design is rank deficient ({rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("root bracket not found for target {target} after {doublings} doublings (last z = {last_z:e}, g = {last_g:e})")]
    BracketNotFound {
        target: f64,
        doublings: usize,
        last_z: f64,
        last_g: f64,
    },

    #[error("rejection sampler acceptance rate {rate:e} below {minimum:e}")]
    LowAcceptance { rate: f64, minimum: f64 },

    #[error("no model carries posterior mass")]
    EmptyPosterior,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{name} = {value}")))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {value}")))
    }
}
