//! Positive steady states by damped-Newton continuation in `r` from the
//! analytic limit `u_0 = c0`.
//!
//! The steady equation is `P0 u + r e^{ax} u (m - int K e^{ay} u) = 0`. At
//! `r = 0` every constant solves it; the branch through `c0` has tangent
//! `v*`, the unique mean-zero solution of
//! `P0 v* = -c0 e^{ax} (m - c0 int K e^{ay} dy)`. Continuation warm-starts
//! each Newton solve from the previous state, beginning at `c0 + dr v*`.

use nalgebra::DMatrix;

use crate::discretize::{to_complex, DiscreteOperators, RealField};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tolerances::{STEADY_NEWTON_MAX_ITER, STEADY_NEWTON_TOL};

/// A computed branch of positive steady states over increasing `r`.
#[derive(Debug, Clone)]
pub struct SteadyBranch {
    pub r_values: Vec<f64>,
    pub states: Vec<RealField>,
    pub residual_norms: Vec<f64>,
    /// Branch tangent `w'(0) = v*` at `r = 0`.
    pub v_star: RealField,
}

impl SteadyBranch {
    /// State at an exact branch point (within 1e-12 in `r`).
    pub fn state_at(&self, r: f64) -> Option<&RealField> {
        self.r_values
            .iter()
            .position(|rv| (rv - r).abs() <= 1e-12 * r.abs().max(1.0))
            .map(|i| &self.states[i])
    }
}

/// Residual of the steady equation: `P0 u + r e^{ax} u (m - Kmat u)`.
pub fn steady_residual(u: &RealField, r: f64, ops: &DiscreteOperators) -> RealField {
    let ku = &ops.kmat * u;
    let mut out = ops.p0_apply(u);
    for j in 0..u.len() {
        out[j] += r * ops.eax[j] * u[j] * (ops.m_nodes[j] - ku[j]);
    }
    out
}

/// Jacobian of [`steady_residual`] in `u`:
/// `P0 + r D[e^{ax}(m - Kmat u)] - r D[e^{ax} u] Kmat`.
pub fn steady_jacobian(u: &RealField, r: f64, ops: &DiscreteOperators) -> DMatrix<f64> {
    let n = u.len();
    let ku = &ops.kmat * u;
    let mut jac = ops.p0.clone();
    for j in 0..n {
        jac[(j, j)] += r * ops.eax[j] * (ops.m_nodes[j] - ku[j]);
        let row_scale = r * ops.eax[j] * u[j];
        for k in 0..n {
            jac[(j, k)] -= row_scale * ops.kmat[(j, k)];
        }
    }
    jac
}

/// The branch tangent `v*` at `r = 0`.
pub fn tangent_v_star(ops: &DiscreteOperators) -> Result<RealField> {
    let c0 = crate::model::c0_from_ops(ops)?;
    let k1 = ops.kmat_one();
    let rhs = RealField::from_fn(ops.n_nodes(), |j, _| {
        -c0 * ops.eax[j] * (ops.m_nodes[j] - c0 * k1[j])
    });
    let z = ops.solve_p0_on_x1(&to_complex(&rhs))?;
    Ok(RealField::from_fn(ops.n_nodes(), |j, _| z[j].re))
}

fn sup_norm(v: &RealField) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// One damped-Newton solve of the steady equation at fixed `r`.
fn newton_at(u0: &RealField, r: f64, ops: &DiscreteOperators) -> Result<(RealField, f64)> {
    let mut u = u0.clone();
    let mut res = steady_residual(&u, r, ops);
    let mut rnorm = sup_norm(&res);
    for _ in 0..STEADY_NEWTON_MAX_ITER {
        if rnorm <= STEADY_NEWTON_TOL {
            if u.iter().any(|v| *v <= 0.0) {
                return Err(Error::PositivityLost { r });
            }
            return Ok((u, rnorm));
        }
        let jac = nalgebra::linalg::LU::new(steady_jacobian(&u, r, ops));
        let step = jac.solve(&res).ok_or(Error::NearSingular(f64::INFINITY))?;
        // Damped update: halve until the residual does not grow.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial = &u - scale * &step;
            let tres = steady_residual(&trial, r, ops);
            let tnorm = sup_norm(&tres);
            if tnorm < rnorm {
                u = trial;
                res = tres;
                rnorm = tnorm;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { r, residual: rnorm });
        }
    }
    if rnorm <= STEADY_NEWTON_TOL {
        if u.iter().any(|v| *v <= 0.0) {
            return Err(Error::PositivityLost { r });
        }
        return Ok((u, rnorm));
    }
    Err(Error::NewtonDiverged { r, residual: rnorm })
}

/// Continue the branch from `r = 0` to `r_max` in steps of `dr`, halving the
/// step on Newton failure (up to 6 halvings).
pub fn continue_branch(
    params: &ModelParams,
    ops: &DiscreteOperators,
    r_max: f64,
    dr: f64,
) -> Result<SteadyBranch> {
    if !(dr > 0.0) || !(r_max > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need r_max > 0 and dr > 0, got {r_max}, {dr}"
        )));
    }
    params.validate()?;
    let c0 = crate::model::c0_from_ops(ops)?;
    let v_star = tangent_v_star(ops)?;

    let mut branch = SteadyBranch {
        r_values: Vec::new(),
        states: Vec::new(),
        residual_norms: Vec::new(),
        v_star,
    };

    let mut r = 0.0;
    let mut step = dr;
    let mut u = RealField::from_element(ops.n_nodes(), c0);
    let mut halvings = 0usize;
    while r < r_max - 1e-14 {
        let r_next = (r + step).min(r_max);
        // Tangent predictor from the analytic limit on the first step,
        // plain warm start afterwards.
        let guess = if branch.r_values.is_empty() {
            RealField::from_fn(ops.n_nodes(), |j, _| c0 + r_next * branch.v_star[j])
        } else {
            u.clone()
        };
        match newton_at(&guess, r_next, ops) {
            Ok((state, rnorm)) => {
                u = state.clone();
                r = r_next;
                branch.r_values.push(r);
                branch.states.push(state);
                branch.residual_norms.push(rnorm);
            }
            Err(e) => {
                halvings += 1;
                if halvings > 6 {
                    return Err(e);
                }
                step *= 0.5;
            }
        }
    }
    Ok(branch)
}
