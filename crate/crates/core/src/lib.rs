//! Numerical bifurcation toolkit for a delayed, nonlocal
//! reaction-diffusion-advection logistic population model.
//!
//! The pipeline, bottom to top:
//!
//! * [`model`] - parameters, growth profiles, kernels, the scalars `c0`, `h0`.
//! * [`discretize`] - weighted diffusion operator, quadrature, kernel matrix.
//! * [`steady`] - positive steady states by Newton continuation in `r`.
//! * [`charpoint`] - the Hopf characteristic system, delay ladder `tau_n`,
//!   eigenfunctions, adjoints, and the simplicity pairing `S_n`.
//! * [`spectrum`] - independent spectral oracle: pseudospectral delay
//!   generator, rightmost eigenvalues, unstable counts, transversality.
//! * [`normalform`] - center-manifold coefficients and the direction /
//!   orbital-stability verdict of the bifurcation.
//! * [`simulate`] - IMEX time integration of the full nonlinear delay PDE
//!   with oscillation diagnostics.
//! * [`hetero`] - spatial-heterogeneity sweeps: `tau_0` asymptotics and
//!   advection / domain-scale orderings.
//! * [`verify`] - the acceptance checks wired into both `cargo test` and the
//!   CLI `verify` subcommand.

pub mod charpoint;
pub mod discretize;
pub mod error;
pub mod hetero;
pub mod model;
pub mod normalform;
pub mod par;
pub mod scalarref;
pub mod simulate;
pub mod spectrum;
pub mod steady;
pub mod tolerances;
pub mod verify;

pub use discretize::{ComplexField, DiscreteOperators, Grid, RealField};
pub use error::{Error, Result};
pub use model::{GrowthSpec, KernelSpec, ModelParams};
