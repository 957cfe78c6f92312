use num_complex::Complex64;
use thiserror::Error;

/// Errors raised anywhere in the continuation pipeline.
///
/// Variants split into usage errors (bad shapes, ids, arguments) and
/// numerical failures (singularities, gap collapse, rank loss); see
/// [`KatoError::is_numerical`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KatoError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("matrix is numerically singular (pivot {pivot:.3e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("matrix is rank deficient (column {column}, diagonal {diagonal:.3e})")]
    RankDeficient { column: usize, diagonal: f64 },

    #[error("eigenvalue {eigenvalue} lies within {gap_tol:.3e} of the imaginary axis")]
    SpectralGapViolation { eigenvalue: Complex64, gap_tol: f64 },

    #[error("selected spectral subspace is empty")]
    EmptySubspace,

    #[error("left and right bases are degenerate: L*R is numerically singular")]
    DegenerateDuality,

    #[error("lambda = {lambda} lies outside the family domain ({note})")]
    DomainViolation { lambda: Complex64, note: String },

    #[error("initial basis is not in range P(lambda_0): residual {residual:.3e} > tol {tol:.3e}")]
    InitNotInRange { residual: f64, tol: f64 },

    #[error("rank collapse at frame {frame}: numerical rank {rank} < {expected}")]
    RankCollapse { frame: usize, rank: usize, expected: usize },

    #[error("non-finite state encountered at lambda = {lambda}")]
    NonFiniteState { lambda: Complex64 },

    #[error("QR iteration failed to converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

impl KatoError {
    /// True for failures of the numerics (as opposed to the caller's input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            KatoError::DimensionMismatch { .. }
                | KatoError::InvalidArgument(_)
                | KatoError::Parse(_)
                | KatoError::Io(_)
                | KatoError::InitNotInRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, KatoError>;
