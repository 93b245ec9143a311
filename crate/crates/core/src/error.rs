use thiserror::Error;

/// Errors raised by the simulation, estimation and expansion layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its subdivision limit before meeting the tolerance.
    #[error("quadrature did not converge: {what} (value {value:e}, error estimate {error:e}, {subdivisions} subdivisions)")]
    Quadrature {
        what: String,
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    /// Covariance factorization failed in the dense fallback sampler.
    #[error("covariance factorization failed (n = {n}, minimal circulant eigenvalue {min_eigenvalue:e})")]
    Factorization { n: usize, min_eigenvalue: f64 },

    /// The exact-solution recursion would leave the exponent range of `f64`.
    #[error("theta * T = {0} exceeds the supported exponent range (700)")]
    Overflow(f64),

    /// The moment estimator is undefined (zero quadratic functional).
    #[error("estimation failure: {0}")]
    Estimation(String),

    /// Too many Monte Carlo replications failed.
    #[error("{failed} of {total} replications failed (limit 1%)")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical method, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::Factorization { .. }
                | Error::Overflow(_)
                | Error::Estimation(_)
                | Error::TooManyFailures { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
