//! Error type shared by every solver stage.

use thiserror::Error;

/// Errors surfaced by model validation, discrete operators, and solvers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The kernel double integral came out nonpositive, violating (A2).
    #[error("kernel mass {0:.6e} is not positive")]
    ZeroKernelMass(f64),

    /// A field does not match the grid resolution.
    #[error("field length {got} does not match grid node count {want}")]
    LengthMismatch { got: usize, want: usize },

    /// Right-hand side is not in the range of the weighted diffusion operator.
    #[error("right-hand side is not mean-compatible (integral {0:.3e} relative to norm)")]
    NotInRange(f64),

    /// Newton iteration failed to reach the residual target.
    #[error("Newton iteration diverged at r = {r} (residual {residual:.3e})")]
    NewtonDiverged { r: f64, residual: f64 },

    /// A steady-state iterate dropped to zero or below at some node.
    #[error("steady state lost positivity at r = {r}")]
    PositivityLost { r: f64 },

    /// The characteristic frequency h collapsed to a nonpositive value.
    #[error("characteristic frequency collapsed (h = {0:.6e})")]
    FrequencyCollapse(f64),

    /// |S_n| fell below the simplicity threshold.
    #[error("simplicity pairing |S_n| = {0:.3e} is below threshold")]
    SimplicityViolated(f64),

    /// A dense solve hit a near-singular matrix (resonance or tau miss).
    #[error("linear system is near singular (condition estimate {0:.3e})")]
    NearSingular(f64),

    /// The dense eigenvalue iteration did not converge.
    #[error("QR eigenvalue iteration failed to converge")]
    QrNoConvergence,

    /// The tracked critical eigenvalue pair could not be followed in tau.
    #[error("lost track of the critical eigenvalue pair near tau = {0}")]
    PairTrackingLost(f64),

    /// The time integration left the physical regime.
    #[error("simulation blew up (sup |u| = {0:.3e})")]
    BlowUp(f64),

    /// A comparison was requested outside its hypothesis.
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    /// A monotonicity scan found cells with the wrong derivative sign.
    #[error("sign assertion violated in {count} cells: {cells}")]
    SignViolation { count: usize, cells: String },

    /// Model parameters failed validation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Configuration input could not be interpreted.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
