use num_complex::Complex64;
use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numeric,
    Hypothesis,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("truncation order K = {k} is below the coefficient bandwidth {bandwidth}")]
    Truncation { k: usize, bandwidth: usize },

    #[error("matrix dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("eigenvalue iteration failed to converge (unreduced block starting at index {index})")]
    EigNoConvergence { index: usize },

    #[error("singular value decomposition failed to converge")]
    SvdNoConvergence,

    #[error("matrix is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("xi cutoff {xi_cut} is too small: the region is reached at |xi| = xi_cut")]
    XiCutoff { xi_cut: f64 },

    #[error("{0} is outside the open range required by the hypothesis")]
    OutOfRange(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("function is (nearly) zero on the contour at {z} (|f| = {modulus:e})")]
    ZeroOnContour { z: Complex64, modulus: f64 },

    #[error("phase jump on a contour segment not resolved within refinement limit {limit}")]
    RefinementLimit { limit: usize },

    #[error("gauge discontinuity on the stencil (overlap {overlap:.3})")]
    GaugeDiscontinuity { overlap: f64 },

    #[error("resolution guard: {0}")]
    Resolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_) | Error::Io(_) => ErrorCategory::Config,
            Error::OutOfRange(_) | Error::Hypothesis(_) => ErrorCategory::Hypothesis,
            _ => ErrorCategory::Numeric,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
