use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e} exceeds {tolerance:.3e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("matrix has a materially negative eigenvalue {min:.6e} (largest magnitude {max:.6e})")]
    MateriallyNegative { min: f64, max: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {d} with k = {k} exceeds the dense compound limit")]
    DimensionTooLarge { d: usize, k: usize },

    #[error("bad cardinality k = {k} for dimension d = {d}")]
    BadCardinality { d: usize, k: usize },

    #[error("index sets have different cardinalities ({left} vs {right})")]
    CardinalityMismatch { left: usize, right: usize },

    #[error("antisymmetric tensor is not decomposable (kernel dimension {kernel_dim}, expected {k})")]
    NotDecomposable { kernel_dim: usize, k: usize },

    #[error("eta_{k} vanishes; no extremal pairs exist")]
    EtaZero { k: usize },

    #[error("principal eigenvalue of Q at boundary k = {k} is not simple (ratio {ratio:.3e})")]
    QNotRankOne { k: usize, ratio: f64 },

    #[error("maximality condition fails at k = {k}")]
    MaximalityFails { k: usize },

    #[error("epsilon regularization did not settle (last increment {increment:.3e})")]
    RegularizationDiverged { increment: f64 },

    #[error("p-schedule did not converge (last increment {increment:.3e})")]
    NotConverged { increment: f64 },

    #[error("not a density matrix (trace {trace:.12})")]
    NotDensity { trace: f64 },

    #[error("alpha = 1 is excluded")]
    AlphaOne,

    #[error("z = 0 is excluded")]
    ZZero,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("projections have different ranks ({left} vs {right})")]
    RankMismatch { left: usize, right: usize },

    #[error("matrix is not an orthogonal projection (defect {defect:.3e})")]
    NotProjection { defect: f64 },

    #[error("frame shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("extrapolation needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("bad spectrum: {0}")]
    BadSpectrum(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
