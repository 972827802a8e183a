use thiserror::Error;

use crate::capacity::CapacityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside kernel domain: {0}")]
    Domain(String),

    #[error("kernel is singular on the diagonal; a cell width is required")]
    SingularDiagonal,

    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge within {max_iters} iterations")]
    NonConvergence {
        max_iters: usize,
        best: Box<CapacityReport>,
    },

    #[error("measure is not certified optimal (residual {residual:.3e} > {tol:.3e})")]
    UncertifiedMeasure { residual: f64, tol: f64 },

    #[error("four-atom family does not certify at a = {a} (residual {residual:.3e})")]
    NotInRegime { a: f64, residual: f64 },

    #[error("margin has no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("covariance integral diverges: {0}")]
    Divergent(String),

    #[error("degenerate correlation {0}")]
    DegenerateCorrelation(f64),

    #[error("Cholesky factorization failed after jitter {jitter:.3e}")]
    CholeskyFailure { jitter: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::SingularDiagonal => "singular_diagonal",
            Error::DegeneratePath(_) => "degenerate_path",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::Precondition(_) => "precondition",
            Error::NonConvergence { .. } => "non_convergence",
            Error::UncertifiedMeasure { .. } => "uncertified_measure",
            Error::NotInRegime { .. } => "not_in_regime",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::Divergent(_) => "divergent",
            Error::DegenerateCorrelation(_) => "degenerate_correlation",
            Error::CholeskyFailure { .. } => "cholesky_failure",
            Error::Json(_) => "json",
        }
    }
}
