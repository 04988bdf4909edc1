//! Crate-wide error type.
//!
//! Numerical failures carry enough payload to be actionable: the last valid
//! iterate, the best estimate so far, or the indices of a violated invariant.

use thiserror::Error;

/// Errors produced by the numerical kernels and model engines.
#[derive(Debug, Error)]
pub enum Error {
    /// Two grid-indexed objects do not live on the same grid.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input carries no usable mass (zero or negative total).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Root bracketing failed: no sign change on the given interval.
    #[error("no sign change on bracket: f(lo)={f_lo}, f(hi)={f_hi}")]
    Bracket { f_lo: f64, f_hi: f64 },

    /// Adaptive quadrature exhausted its refinement budget.
    #[error("quadrature tolerance not met: best estimate {best} (error ~{error_estimate})")]
    ToleranceNotMet { best: f64, error_estimate: f64 },

    /// A trajectory produced a non-finite value; `state` is the last valid state.
    #[error("non-finite value at t={t}")]
    NonFinite { t: f64, state: Vec<f64> },

    /// Iteration did not converge; carries the last iterate and its residual.
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    /// A matrix invariant is violated; indices are 0-based.
    #[error("matrix validation failed at row {row}{}: {message}", col.map(|c| format!(", col {c}")).unwrap_or_default())]
    Validation {
        row: usize,
        col: Option<usize>,
        message: String,
    },

    /// Formula domain exhausted (e.g. a logarithm argument reached zero).
    #[error("saturation: {0}")]
    Saturation(String),

    /// The chain is reducible; one stationary solution per closed class is attached.
    #[error("reducible chain: {} closed classes, one stationary vector each", class_solutions.len())]
    Reducible { class_solutions: Vec<Vec<f64>> },

    /// A rate exceeded its declared bound during thinning.
    #[error("rate bound violated: bound {bound}, observed {observed}")]
    BoundViolation { bound: f64, observed: f64 },

    /// A state left the model's declared invariant region.
    #[error("state left the invariant region at t={t}")]
    RegionViolation { t: f64, state: Vec<f64> },

    /// A stability (CFL-type) condition on the step size is violated.
    #[error("step size error: {0}")]
    StepSize(String),

    /// A guard/threshold was never reached within the declared horizon.
    #[error("stall: guard not reached within horizon {horizon}")]
    Stall { horizon: f64 },

    /// Pointwise transfer-operator evaluation hit a branch-image boundary.
    #[error("x={x} lies on a branch-image boundary")]
    BoundaryPoint { x: f64 },

    /// Spectral computation too ill-conditioned to trust.
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    /// Parameters sit on a critical equality where the theory gives no verdict.
    #[error("critical case, no verdict: {0}")]
    CriticalCase(String),

    /// The dominant eigenvalue is a complex pair; no real limit exists.
    /// Oscillation data is reported instead.
    #[error("complex dominant eigenvalue {real}±{imag}i (period {period})")]
    ComplexDominant {
        real: f64,
        imag: f64,
        /// 2π/|Im λ|.
        period: f64,
        /// Quality of the best small-denominator rational approximation of
        /// the imaginary-part ratios (0 = exactly commensurable).
        rational_quality: f64,
    },

    /// Birth-death recursion hit a zero birth rate.
    #[error("absorbing boundary: birth rate vanishes at index {index}")]
    AbsorbingBoundary { index: usize },

    /// Inverse-CDF or rejection sampler failed to bracket.
    #[error("sampler error: {0}")]
    SamplerError(String),

    /// A declared model assumption fails on the grid.
    #[error("model assumption {which} violated: {detail}")]
    AssumptionViolated { which: String, detail: String },

    /// Inverse-branch geometry broke down while building an operator.
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
