use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin size {0}: 2S must be a non-negative integer")]
    InvalidSpin(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigendecomposition did not converge")]
    EigenConvergence,

    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("W and V do not commute at t = 0 (residual {0:.3e})")]
    NonCommuting(f64),

    #[error("W must be traceless (|tr W| = {0:.3e})")]
    NotTraceless(f64),

    #[error("degenerate energy normalization: E_inf - E_0 = {0:.3e}")]
    DegenerateNormalization(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("Krylov propagation did not converge within {0} basis vectors")]
    KrylovConvergence(usize),

    #[error("vanishing second moment ({0:.3e}) in randomized estimator")]
    VanishingMoment(f64),

    #[error("{what}: size {size} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("integrator failed: {0}")]
    Integrator(String),
}

pub type Result<T> = std::result::Result<T, Error>;
