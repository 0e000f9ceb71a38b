//! Tolerances and thresholds used across solvers and the acceptance suite.
//!
//! Everything here is pinned; no check calibrates its own threshold at run
//! time.

/// Newton target for steady states (sup norm of the residual).
pub const STEADY_NEWTON_TOL: f64 = 1e-10;

/// Maximum Newton iterations per steady solve.
pub const STEADY_NEWTON_MAX_ITER: usize = 25;

/// Joint residual target for the characteristic system solve.
pub const CHAR_NEWTON_TOL: f64 = 1e-11;

/// `|S_n|` below this is treated as a simplicity violation.
pub const SIMPLICITY_MIN: f64 = 1e-8;

/// Real parts above this count as unstable in spectrum reports. Above the
/// QR noise floor, far below the physical eigenvalue gaps at the tested
/// parameters.
pub const SPECTRUM_TOL_ZERO: f64 = 1e-7;

/// Condition-number proxy limit for the dense resolvent solves; beyond this
/// the requested shift sits (numerically) on an eigenvalue.
pub const NEAR_SINGULAR_COND: f64 = 1e12;

/// Relative step for the transversality finite difference in tau.
pub const TRANSVERSALITY_REL_STEP: f64 = 1e-4;

/// Sup-distance to the steady state below which a trajectory has decayed.
pub const SIM_DECAY_TOL: f64 = 1e-6;

/// Peak-to-peak agreement (relative) required to call a trajectory a stable
/// oscillation.
pub const SIM_PEAK_AGREEMENT: f64 = 0.05;

/// Minimum peak-to-peak amplitude for an oscillation verdict.
pub const SIM_MIN_AMPLITUDE: f64 = 1e-4;

/// Blow-up guard on the sup norm of the simulated state.
pub const SIM_BLOWUP: f64 = 1e6;

/// Default number of time steps per delay interval.
pub const SIM_DELAY_STEPS: usize = 256;

/// Default delay-collocation points for the generator discretization.
pub const DEFAULT_COLLOCATION: usize = 24;

/// Default ladder depth for the Hopf delays `tau_0..tau_n`.
pub const DEFAULT_N_MAX: usize = 3;

/// Central-difference step for the `h0` derivative scans.
pub const H0_DERIVATIVE_STEP: f64 = 1e-4;
