//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("mesh too coarse: n = {n}, need at least {min}")]
    TooCoarse { n: usize, min: usize },

    #[error("base length must be positive, got {length}")]
    NonPositiveLength { length: f64 },

    #[error("boundary condition {bc} is incompatible with base kind {kind}")]
    IncompatibleBoundary { kind: String, bc: String },

    #[error("warping function is not strictly positive: value {value} at {location} index {index}")]
    NonPositiveWarp {
        index: usize,
        value: f64,
        location: &'static str,
    },

    #[error("array length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite input in {what}")]
    NonFiniteInput { what: &'static str },

    #[error("invalid spectral cutoff: {what}")]
    InvalidCutoff { what: String },

    #[error("fiber eigenvalue must be nonnegative, got {mu}")]
    NegativeEigenvalue { mu: f64 },

    #[error("fiber multiplicity must be positive (mu = {mu})")]
    ZeroMultiplicity { mu: f64 },

    #[error("fiber spectrum has no entries")]
    EmptyFiber,

    #[error("eigensolver failed to converge: size {size}, {iterations} iterations{}", mu.map(|m| format!(", mu = {m}")).unwrap_or_default())]
    ConvergenceFailure {
        size: usize,
        iterations: usize,
        mu: Option<f64>,
    },

    #[error("family members were built on different grids: {detail}")]
    InconsistentFamily { detail: String },

    #[error("cluster tolerance must be positive, got {tol}")]
    NonPositiveTolerance { tol: f64 },

    #[error("eigenvalue {lambda} at index {index} is degenerate (gap {gap}); use the degenerate slope matrix")]
    DegenerateEigenvalue { index: usize, lambda: f64, gap: f64 },

    #[error("eigenvector is not normalized in the weighted inner product: norm^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("eigenspace basis is not weighted-orthonormal: defect {defect}")]
    NotOrthonormal { defect: f64 },

    #[error("warping function loses positivity along the perturbation at t = {t}")]
    PositivityLost { t: f64 },

    #[error("eigenvector matching ambiguous between t = {t_lo} and t = {t_hi}: best overlap {overlap}")]
    MatchingAmbiguous { overlap: f64, t_lo: f64, t_hi: f64 },

    #[error("dense solve budget exceeded: problem size {size} > {max}")]
    BudgetExceeded { size: usize, max: usize },

    #[error("spectrum size mismatch: {detail}")]
    SizeMismatch { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
