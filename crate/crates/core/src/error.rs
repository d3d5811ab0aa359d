use thiserror::Error;

/// Errors produced by model construction, simulation, filtering and fitting.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter or model input violates its constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Transverse relaxation must be at least as fast as longitudinal.
    #[error("relaxation rates violate t2_inv >= t1_inv (t1_inv={t1_inv}, t2_inv={t2_inv})")]
    RelaxationOrdering { t1_inv: f64, t2_inv: f64 },

    /// A covariance matrix is indefinite beyond the tolerated rounding slack.
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, tolerance: f64 },

    /// An observation or series entry is NaN or infinite.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// Input series too short for the requested operation.
    #[error("{context}: need at least {required} points, got {actual}")]
    TooShort {
        context: &'static str,
        required: usize,
        actual: usize,
    },

    /// Two inputs that must be aligned have different lengths or steps.
    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    /// An iterative solver did not reach its convergence criterion.
    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence {
        context: &'static str,
        iterations: usize,
    },

    /// The least-squares design has no unique solution.
    #[error("rank-deficient fit design: {0}")]
    RankDeficient(String),

    /// A spectrum carries no resolvable peak to fit.
    #[error("no peak detected in the fit window")]
    NoPeak,
}

pub type Result<T> = std::result::Result<T, Error>;
