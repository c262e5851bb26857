//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by validation, numerics, and I/O across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("width must be at least 1, got {0}")]
    InvalidWidth(usize),

    #[error("operation requires width d >= 2 (the d = 1 orbit is a single point)")]
    DegenerateWidth,

    #[error("exponent must be nonnegative, got {0}")]
    NegativeExponent(f64),

    #[error("exponent interval requires 0 < alpha_min <= alpha_max, got [{0}, {1}]")]
    InvalidInterval(f64, f64),

    #[error("exponent bound {0} requires s > 1 (got s = {1})")]
    TailBoundRange(&'static str, f64),

    #[error("tail bounds for the truncation rank require alpha > 1/2, got {0}")]
    ExponentBelowHalf(f64),

    #[error("epsilon must lie strictly inside (0, 1), got {0}")]
    InvalidEpsilon(f64),

    #[error("rank index {r} outside 0..={d}")]
    RankOutOfRange { r: usize, d: usize },

    #[error("layer index {index} outside valid range {len}")]
    LayerIndex { index: usize, len: usize },

    #[error("tail residual {delta} leaves no sandwich margin around epsilon {eps}")]
    MarginTooSmall { delta: f64, eps: f64 },

    #[error("spectrum values must be nonnegative and nonincreasing")]
    InvalidSpectrum,

    #[error("Cartan point requires strictly positive eigenvalues")]
    NonPositiveEigenvalue,

    #[error("top eigenvalue is zero; the radial functional is undefined")]
    ZeroTopEigenvalue,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("matrix entry at ({0}, {1}) is not finite")]
    NonFiniteEntry(usize, usize),

    #[error("layer {index} is rank deficient (sigma_min/sigma_max = {ratio:.3e}); regularize with epsilon > 0")]
    RankDeficient { index: usize, ratio: f64 },

    #[error("chain must contain at least {required} layers, got {got}")]
    ChainTooShort { required: usize, got: usize },

    #[error("chain is not Frobenius normalized: layer {index} has ||W||_F^2 = {frobenius_sq}, d = {d}")]
    ChainNotNormalized {
        index: usize,
        frobenius_sq: f64,
        d: usize,
    },

    #[error("rank window must contain at least 2 ranks inside 1..=d")]
    DegenerateWindow,

    #[error("rank window entry {0} outside 1..={1}")]
    WindowOutOfRange(usize, usize),

    #[error("log least-squares window hits a zero singular value at rank {0}")]
    ZeroSingularValueInWindow(usize),

    #[error("residual sequence needs at least 2 entries, got {0}")]
    SequenceTooShort(usize),

    #[error("operator norm of a factor or product is zero")]
    ZeroOperatorNorm,

    #[error("generator bound violated: ||A_{index}||_2 = {norm} exceeds C = {bound}")]
    GeneratorBound { index: usize, norm: f64, bound: f64 },

    #[error("near-identity construction requires t*C < 1, got t*C = {0}")]
    StepTooLarge(f64),

    #[error("explicit margin bound requires t*C <= 1/4, got t*C = {0}")]
    StepBeyondQuarter(f64),

    #[error("budget hypothesis violated: {0}")]
    BudgetHypothesis(String),

    #[error("matrix container: {0}")]
    Container(String),

    #[error("config: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
