//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants are
//! grouped by the stage that raises them so callers can map them onto exit
//! codes or retry policies without string matching.

use thiserror::Error;

/// Errors raised by parameter construction, field synthesis, solvers, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension outside the supported range 1..=3.
    #[error("dimension n = {0} unsupported (expected 1 <= n <= 3)")]
    BadDimension(usize),

    /// Fractional order outside the admissible open interval (0, n/2).
    #[error("order s = {s} outside (0, {limit}) for n = {n}")]
    BadOrder { s: f64, n: usize, limit: f64 },

    /// A scale parameter that must be strictly positive was not.
    #[error("scale lambda = {0} must be strictly positive and finite")]
    BadScale(f64),

    /// Generic invalid argument with context.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Grid construction rejected the requested shape.
    #[error("bad grid: {0}")]
    BadGrid(String),

    /// Two fields (or a field and an operator) live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Pointwise nonlinear power detected spectral content beyond the
    /// resolved band above the configured alarm threshold.
    #[error("aliasing alarm: high-band fraction {fraction:.3e} exceeds {threshold:.1e}")]
    Aliasing { fraction: f64, threshold: f64 },

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: estimated error {error:.3e} > tol {tol:.3e}")]
    QuadratureFailure { error: f64, tol: f64 },

    /// Interaction strength too large for the linear theory to apply.
    #[error("interaction Q_max = {q:.4} exceeds admissible threshold {threshold}")]
    InteractionTooStrong { q: f64, threshold: f64 },

    /// Krylov iteration exhausted its budget before reaching tolerance.
    #[error("linear solve stalled: residual {residual:.3e} after {iters} iterations (tol {tol:.1e})")]
    KrylovStall { residual: f64, iters: usize, tol: f64 },

    /// The damped fixed point stopped contracting (increment grew on three
    /// consecutive iterations). Carries the iterate history for diagnostics.
    #[error("fixed point stopped contracting after {iters} iterations (last increments {last:?})")]
    NonContraction { iters: usize, last: Vec<f64> },

    /// Bubble fitting declared the configuration degenerate.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Gauss-Newton fitting did not converge.
    #[error("fit did not converge: gradient norm {grad:.3e} after {iters} iterations")]
    FitStall { grad: f64, iters: usize },

    /// Eigensolver breakdown (loss of orthogonality, failed factorization).
    #[error("eigensolver breakdown: {0}")]
    EigenBreakdown(String),

    /// Field (de)serialization failure.
    #[error("serialization: {0}")]
    Serialization(String),

    /// Underlying I/O failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
