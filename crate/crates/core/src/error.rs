use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hurst must lie strictly in (0.5, 1), got {0}")]
    InvalidHurst(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("covariance matrix is not numerically positive definite (n = {n})")]
    NotPositiveDefinite { n: usize },

    #[error("circulant embedding has eigenvalue {value:e} below tolerance (max {max:e}, index {index})")]
    EmbeddingFailure { index: usize, value: f64, max: f64 },

    #[error("quadrature not converged: res {res} -> {coarse:e}, res {fine_res} -> {fine:e} (relative change {rel:e})")]
    QuadratureNotConverged {
        res: usize,
        fine_res: usize,
        coarse: f64,
        fine: f64,
        rel: f64,
    },

    #[error("fit needs at least 2 usable points, got {0}")]
    InsufficientPoints(usize),

    #[error("samples must be >= 2, got {0}")]
    InsufficientSamples(usize),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (embedding, factorization, quadrature)
    /// as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::EmbeddingFailure { .. }
                | Error::QuadratureNotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
