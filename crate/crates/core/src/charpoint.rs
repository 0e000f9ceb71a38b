//! The Hopf characteristic system and its adjoint.
//!
//! A purely imaginary eigenvalue `i nu` of the linearization at `u_r` exists
//! if and only if, with `psi = beta c0 + r z` (`z` mean-zero, `beta >= 0`,
//! `|psi|_Y^2 = c0^2 L`) and `nu = r h`,
//!
//! ```text
//! g1 = P0 z + e^{ax} Kt(r) psi - i h e^{ax} psi - e^{ax} u_r (Kmat psi) e^{-i theta} = 0,
//! g2 = (beta^2 - 1) c0^2 L + r^2 |z|_Y^2 = 0,
//! ```
//!
//! where `Kt(r) = m - Kmat u_r`. The solver Newton-iterates the real-ified
//! system in the unknowns `(Re z, Im z, beta, h, theta)` with two scalar
//! mean constraints pinning `z` to the mean-zero subspace; the count is
//! `2(N+1) + 3` equations (complex field equation, `g2`, two means) against
//! `2(N+1) + 3` unknowns, so the system is square. The `r = 0` start is the
//! closed-form solution `(z0, 1, h0, pi/2)`.
//!
//! The adjoint system has the transposed kernel, `e^{+i theta}` and `+ih`;
//! both share `(h, theta, nu, tau_n)`, which the solver checks rather than
//! assumes. Delays ladder up as `tau_n = (theta + 2 n pi) / nu`, and the
//! pairing `S_n` certifies simplicity of the crossing eigenvalue.
//!
//! Phase convention: `theta` is kept unwrapped during Newton iterations and
//! wrapped into `[0, 2 pi)` only at output; `mean(psi) = beta c0 L` is real
//! and nonnegative by construction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::discretize::{apply_re, to_complex, ComplexField, DiscreteOperators, RealField};
use crate::error::{Error, Result};
use crate::model::{c0_from_ops, h0_from_ops, KernelSpec, ModelParams};
use crate::steady::SteadyBranch;
use crate::tolerances::{CHAR_NEWTON_TOL, DEFAULT_N_MAX, SIMPLICITY_MIN};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Solution of the characteristic system and its adjoint at one `r`.
#[derive(Debug, Clone)]
pub struct HopfData {
    pub r: f64,
    pub c0: f64,
    pub h_r: f64,
    /// Crossing phase in `[0, 2 pi)`.
    pub theta_r: f64,
    /// Crossing frequency `nu_r = r h_r`.
    pub nu_r: f64,
    pub beta_r: f64,
    pub z_r: ComplexField,
    /// Eigenfunction `psi_r = beta_r c0 + r z_r`.
    pub psi_r: ComplexField,
    pub beta_adj: f64,
    pub z_adj: ComplexField,
    /// Adjoint eigenfunction, same normalization and phase convention.
    pub psi_adj: ComplexField,
    /// Hopf delays `tau_n = (theta_r + 2 n pi) / nu_r`.
    pub tau_ladder: Vec<f64>,
    /// Simplicity pairing per ladder index.
    pub s_n: Vec<Complex64>,
    /// `|g1|_Y` at convergence for the primal and adjoint systems.
    pub residual: f64,
    pub residual_adj: f64,
}

impl HopfData {
    pub fn tau(&self, n: usize) -> f64 {
        self.tau_ladder[n]
    }
}

/// Apply the characteristic operator
/// `Delta(r, mu, tau) psi = e^{-ax} P0 psi + r Kt(r) psi
///  - r u_r (Kmat psi) e^{-mu tau} - mu psi`.
pub fn delta_apply(
    psi: &ComplexField,
    r: f64,
    mu: Complex64,
    tau: f64,
    u_r: &RealField,
    ops: &DiscreteOperators,
) -> ComplexField {
    let n = psi.len();
    let ku = &ops.kmat * u_r;
    let kpsi = ops.kmat_apply(psi);
    let p0psi = ops.p0_apply_complex(psi);
    let phase = (-mu * tau).exp();
    ComplexField::from_fn(n, |j, _| {
        p0psi[j] / ops.eax[j] + r * (ops.m_nodes[j] - ku[j]) * psi[j]
            - r * u_r[j] * kpsi[j] * phase
            - mu * psi[j]
    })
}

/// Dense matrix of `Delta(r, mu, tau)` for resolvent solves.
pub fn delta_matrix(
    r: f64,
    mu: Complex64,
    tau: f64,
    u_r: &RealField,
    ops: &DiscreteOperators,
) -> DMatrix<Complex64> {
    let n = ops.n_nodes();
    let ku = &ops.kmat * u_r;
    let phase = (-mu * tau).exp();
    DMatrix::from_fn(n, n, |j, k| {
        let mut v = Complex64::new(ops.p0[(j, k)] / ops.eax[j], 0.0);
        v -= r * phase * u_r[j] * ops.kmat[(j, k)];
        if j == k {
            v += Complex64::new(r * (ops.m_nodes[j] - ku[j]), 0.0) - mu;
        }
        v
    })
}

/// Apply the adjoint operator
/// `Dt(r, i nu, tau) psi = P0 psi + r e^{ax} Kt(r) psi
///  - r e^{ax} (int K(y,x) e^{ay} u_r psi dy) e^{i nu tau} + i nu e^{ax} psi`.
pub fn delta_adjoint_apply(
    psi: &ComplexField,
    r: f64,
    nu: f64,
    tau: f64,
    u_r: &RealField,
    ops: &DiscreteOperators,
) -> ComplexField {
    let n = psi.len();
    let ku = &ops.kmat * u_r;
    let adj = ops.adjoint_kernel_matrix(u_r);
    let apsi = apply_re(&adj, psi);
    let p0psi = ops.p0_apply_complex(psi);
    let phase = (I * nu * tau).exp();
    ComplexField::from_fn(n, |j, _| {
        p0psi[j]
            + ops.eax[j]
                * (r * (ops.m_nodes[j] - ku[j]) * psi[j] - r * apsi[j] * phase + I * nu * psi[j])
    })
}

/// Pieces shared by the primal and adjoint characteristic systems.
struct CharSystem {
    /// Kernel application: `Kmat` for the primal, its exact discrete adjoint
    /// (with `u_r` folded in) for the adjoint system.
    kernel_op: DMatrix<f64>,
    /// Multiplier on the kernel term: `u_r` for the primal, ones adjoint.
    front: RealField,
    /// `Kt(r) = m - Kmat u_r` diagonal.
    ktilde: RealField,
    /// Sign of the `i h` term and of the phase exponent: primal `-1`, adjoint `+1`.
    sign: f64,
    c0: f64,
    r: f64,
}

impl CharSystem {
    fn primal(r: f64, u_r: &RealField, ops: &DiscreteOperators, c0: f64) -> Self {
        let ku = &ops.kmat * u_r;
        CharSystem {
            kernel_op: ops.kmat.clone(),
            front: u_r.clone(),
            ktilde: RealField::from_fn(ops.n_nodes(), |j, _| ops.m_nodes[j] - ku[j]),
            sign: -1.0,
            c0,
            r,
        }
    }

    fn adjoint(r: f64, u_r: &RealField, ops: &DiscreteOperators, c0: f64) -> Self {
        let ku = &ops.kmat * u_r;
        CharSystem {
            kernel_op: ops.adjoint_kernel_matrix(u_r),
            front: RealField::from_element(ops.n_nodes(), 1.0),
            ktilde: RealField::from_fn(ops.n_nodes(), |j, _| ops.m_nodes[j] - ku[j]),
            sign: 1.0,
            c0,
            r,
        }
    }

    /// `g1` for the current unknowns.
    fn g1(
        &self,
        ops: &DiscreteOperators,
        z: &ComplexField,
        beta: f64,
        h: f64,
        theta: f64,
    ) -> ComplexField {
        let n = z.len();
        let psi = ComplexField::from_fn(n, |j, _| self.c0 * beta + self.r * z[j]);
        let kpsi = apply_re(&self.kernel_op, &psi);
        let p0z = ops.p0_apply_complex(z);
        let phase = (self.sign * I * theta).exp();
        ComplexField::from_fn(n, |j, _| {
            p0z[j]
                + ops.eax[j]
                    * (self.ktilde[j] * psi[j] + self.sign * I * h * psi[j]
                        - self.front[j] * kpsi[j] * phase)
        })
    }

    /// Assemble and solve one Newton step for the real-ified system.
    /// Unknown layout: `[Re z (n), Im z (n), beta, h, theta]`.
    fn newton_step(
        &self,
        ops: &DiscreteOperators,
        z: &ComplexField,
        beta: f64,
        h: f64,
        theta: f64,
    ) -> Result<(ComplexField, f64, f64, f64, f64)> {
        let n = z.len();
        let dim = 2 * n + 3;
        let c0l = self.c0 * self.c0 * ops.grid.length;
        let psi = ComplexField::from_fn(n, |j, _| self.c0 * beta + self.r * z[j]);
        let kpsi = apply_re(&self.kernel_op, &psi);
        let phase = (self.sign * I * theta).exp();

        let g1 = self.g1(ops, z, beta, h, theta);
        let g2 = (beta * beta - 1.0) * c0l + self.r * self.r * ops.norm_y_sq(z);
        let mean = ops.mean_integral(z);

        let mut rhs = DVector::zeros(dim);
        for j in 0..n {
            rhs[j] = -g1[j].re;
            rhs[n + j] = -g1[j].im;
        }
        rhs[2 * n] = -g2;
        rhs[2 * n + 1] = -mean.re;
        rhs[2 * n + 2] = -mean.im;

        // Complex-linear part in z: P0 acts on z directly, everything that
        // enters through psi = beta c0 + r z picks up a factor r.
        let mut jac = DMatrix::zeros(dim, dim);
        for k in 0..n {
            for j in 0..n {
                let kern = ops.eax[j] * self.front[j] * self.kernel_op[(j, k)] * self.r;
                let mut re = ops.p0[(j, k)] - kern * phase.re;
                let mut im = -kern * phase.im;
                if j == k {
                    re += ops.eax[j] * self.ktilde[j] * self.r;
                    im += ops.eax[j] * self.sign * h * self.r;
                }
                // d(g1)/d(Re z_k) = re + i im ; d(g1)/d(Im z_k) = i (re + i im)
                jac[(j, k)] += re;
                jac[(n + j, k)] += im;
                jac[(j, n + k)] += -im;
                jac[(n + j, n + k)] += re;
            }
        }
        for k in 0..n {
            // d g1 / d beta
            let mut col = Complex64::new(0.0, 0.0);
            col += ops.eax[k] * (self.ktilde[k] + self.sign * I * h) * self.c0;
            let kone: f64 = (0..n).map(|j2| self.kernel_op[(k, j2)]).sum();
            col -= ops.eax[k] * self.front[k] * kone * self.c0 * phase;
            jac[(k, 2 * n)] = col.re;
            jac[(n + k, 2 * n)] = col.im;
            // d g1 / d h = sign * i e^{ax} psi
            let dh = self.sign * I * ops.eax[k] * psi[k];
            jac[(k, 2 * n + 1)] = dh.re;
            jac[(n + k, 2 * n + 1)] = dh.im;
            // d g1 / d theta = -sign i phase e^{ax} front kpsi
            let dth = -self.sign * I * phase * ops.eax[k] * self.front[k] * kpsi[k];
            jac[(k, 2 * n + 2)] = dth.re;
            jac[(n + k, 2 * n + 2)] = dth.im;
        }
        // g2 row.
        for k in 0..n {
            jac[(2 * n, k)] = 2.0 * self.r * self.r * ops.grid.weights[k] * z[k].re;
            jac[(2 * n, n + k)] = 2.0 * self.r * self.r * ops.grid.weights[k] * z[k].im;
        }
        jac[(2 * n, 2 * n)] = 2.0 * beta * c0l;
        // Mean-constraint rows.
        for k in 0..n {
            jac[(2 * n + 1, k)] = ops.grid.weights[k];
            jac[(2 * n + 2, n + k)] = ops.grid.weights[k];
        }

        let lu = nalgebra::linalg::LU::new(jac);
        let step = lu.solve(&rhs).ok_or(Error::NearSingular(f64::INFINITY))?;
        let z_new = ComplexField::from_fn(n, |j, _| z[j] + Complex64::new(step[j], step[n + j]));
        Ok((
            z_new,
            beta + step[2 * n],
            h + step[2 * n + 1],
            theta + step[2 * n + 2],
            rhs.amax(),
        ))
    }

    /// Newton-solve from the given start; residual measured in the sup norm
    /// over the real-ified residual vector.
    fn solve(
        &self,
        ops: &DiscreteOperators,
        start: (ComplexField, f64, f64, f64),
    ) -> Result<(ComplexField, f64, f64, f64)> {
        let (mut z, mut beta, mut h, mut theta) = start;
        let mut last_res = f64::INFINITY;
        for _ in 0..30 {
            let (z1, b1, h1, t1, res) = self.newton_step(ops, &z, beta, h, theta)?;
            z = z1;
            beta = b1;
            h = h1;
            theta = t1;
            last_res = res;
            if res <= CHAR_NEWTON_TOL {
                // One more step to polish past the linearization error.
                let (z2, b2, h2, t2, _) = self.newton_step(ops, &z, beta, h, theta)?;
                return Ok((z2, b2, h2, t2));
            }
        }
        Err(Error::NewtonDiverged {
            r: self.r,
            residual: last_res,
        })
    }
}

/// Closed-form solution of the characteristic system at `r = 0`:
/// `beta = 1`, `theta = pi/2`, `h = h0`, and `z0` from the mean-pinned solve.
pub fn solve_r0(ops: &DiscreteOperators) -> Result<(ComplexField, f64, f64, f64)> {
    let c0 = c0_from_ops(ops)?;
    let h0 = h0_from_ops(ops);
    let k1 = ops.kmat_one();
    let rhs = ComplexField::from_fn(ops.n_nodes(), |j, _| {
        -c0 * ops.eax[j] * Complex64::new(ops.m_nodes[j] - c0 * k1[j], 0.0)
            - I * c0 * c0 * ops.eax[j] * k1[j]
            + I * h0 * c0 * ops.eax[j]
    });
    let z0 = ops.solve_p0_on_x1(&rhs)?;
    Ok((z0, 1.0, h0, std::f64::consts::FRAC_PI_2))
}

/// `r = 0` start for the adjoint system (transposed kernel, conjugate phase).
pub fn solve_r0_adjoint(ops: &DiscreteOperators) -> Result<(ComplexField, f64, f64, f64)> {
    let c0 = c0_from_ops(ops)?;
    let h0 = h0_from_ops(ops);
    let k1 = ops.kmat_one();
    // Transposed-kernel row sums: int K(y,x) e^{ay} dy at the nodes.
    let ones = RealField::from_element(ops.n_nodes(), 1.0);
    let adj = ops.adjoint_kernel_matrix(&ones);
    let kt1 = &adj * RealField::from_element(ops.n_nodes(), 1.0);
    let rhs = ComplexField::from_fn(ops.n_nodes(), |j, _| {
        -c0 * ops.eax[j] * Complex64::new(ops.m_nodes[j] - c0 * k1[j], 0.0)
            + I * c0 * c0 * ops.eax[j] * kt1[j]
            - I * h0 * c0 * ops.eax[j]
    });
    let z0 = ops.solve_p0_on_x1(&rhs)?;
    Ok((z0, 1.0, h0, std::f64::consts::FRAC_PI_2))
}

/// Residual of the raw characteristic system at given unknowns; exposed for
/// verification (`g1` is exactly `e^{ax} Delta(r, i r h, tau_n) psi`).
pub fn char_system_residual(
    z: &ComplexField,
    beta: f64,
    h: f64,
    theta: f64,
    r: f64,
    ops: &DiscreteOperators,
    u_r: &RealField,
) -> (ComplexField, f64) {
    let c0 = c0_from_ops(ops).expect("kernel mass positive");
    let sys = CharSystem::primal(r, u_r, ops, c0);
    let g1 = sys.g1(ops, z, beta, h, theta);
    let g2 = (beta * beta - 1.0) * c0 * c0 * ops.grid.length + r * r * ops.norm_y_sq(z);
    (g1, g2)
}

fn wrap_theta(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t < 0.0 {
        t += two_pi;
    }
    t
}

/// Solve the characteristic system and its adjoint at `branch` point `r`,
/// warm-starting along the branch grid from the closed-form `r = 0` start.
pub fn continue_char(
    params: &ModelParams,
    ops: &DiscreteOperators,
    branch: &SteadyBranch,
    r: f64,
) -> Result<HopfData> {
    continue_char_with(params, ops, branch, r, DEFAULT_N_MAX)
}

/// [`continue_char`] with an explicit ladder depth.
pub fn continue_char_with(
    params: &ModelParams,
    ops: &DiscreteOperators,
    branch: &SteadyBranch,
    r: f64,
    n_max: usize,
) -> Result<HopfData> {
    params.validate()?;
    let target_idx = branch
        .r_values
        .iter()
        .position(|rv| (rv - r).abs() <= 1e-12 * r.abs().max(1.0))
        .ok_or_else(|| Error::InvalidParams(format!("r = {r} is not a branch point")))?;
    let c0 = c0_from_ops(ops)?;

    let mut primal = solve_r0(ops)?;
    let mut adjoint = solve_r0_adjoint(ops)?;
    for idx in 0..=target_idx {
        let ri = branch.r_values[idx];
        let u_ri = &branch.states[idx];
        let sys = CharSystem::primal(ri, u_ri, ops, c0);
        primal = sys.solve(ops, primal)?;
        let sys_adj = CharSystem::adjoint(ri, u_ri, ops, c0);
        adjoint = sys_adj.solve(ops, adjoint)?;
    }

    let (z, beta, h, theta_raw) = primal;
    let (z_adj, beta_adj, h_adj, theta_adj_raw) = adjoint;
    if h <= 0.0 {
        return Err(Error::FrequencyCollapse(h));
    }
    let theta = wrap_theta(theta_raw);
    let theta_adj = wrap_theta(theta_adj_raw);
    debug_assert!((h - h_adj).abs() <= 1e-9 * h.abs().max(1.0));
    debug_assert!((theta - theta_adj).abs() <= 1e-9);

    let nu = r * h;
    let n = ops.n_nodes();
    let psi = ComplexField::from_fn(n, |j, _| Complex64::new(beta * c0, 0.0) + r * z[j]);
    let psi_adj =
        ComplexField::from_fn(n, |j, _| Complex64::new(beta_adj * c0, 0.0) + r * z_adj[j]);

    let tau_ladder: Vec<f64> = (0..=n_max)
        .map(|k| (theta + 2.0 * std::f64::consts::PI * k as f64) / nu)
        .collect();

    let u_r = &branch.states[target_idx];
    let sys = CharSystem::primal(r, u_r, ops, c0);
    let g1 = sys.g1(ops, &z, beta, h, theta);
    let residual = ops.norm_y_sq(&g1).sqrt();
    let sys_adj = CharSystem::adjoint(r, u_r, ops, c0);
    let g1_adj = sys_adj.g1(ops, &z_adj, beta_adj, h_adj, theta_adj);
    let residual_adj = ops.norm_y_sq(&g1_adj).sqrt();

    let mut data = HopfData {
        r,
        c0,
        h_r: h,
        theta_r: theta,
        nu_r: nu,
        beta_r: beta,
        z_r: z,
        psi_r: psi,
        beta_adj,
        z_adj,
        psi_adj,
        tau_ladder,
        s_n: Vec::new(),
        residual,
        residual_adj,
    };
    data.s_n = (0..=n_max)
        .map(|k| compute_sn(&data, u_r, ops, k))
        .collect::<Result<Vec<_>>>()?;

    // Boundedness of |mu_r / r| = |h_r| for bounded kernels; the printed
    // bound applies to the L-infinity kernel case, so the delta kernel is
    // skipped.
    if let Some(k_sup) = kernel_sup(&params.kernel) {
        let u_sup = u_r.amax();
        let bound =
            (2.0 * ops.alpha.abs() * ops.grid.length).exp() * ops.grid.length * u_sup * k_sup;
        debug_assert!(
            h.abs() <= bound * (1.0 + 1e-9),
            "|h_r| = {h} exceeds kernel bound {bound}"
        );
    }
    Ok(data)
}

fn kernel_sup(kernel: &KernelSpec) -> Option<f64> {
    match kernel {
        KernelSpec::Delta => None,
        KernelSpec::Cumulative => Some(1.0),
        KernelSpec::Tabulated { matrix: rows } => Some(
            rows.iter()
                .flat_map(|row| row.iter())
                .fold(0.0f64, |a, v| a.max(v.abs())),
        ),
    }
}

/// The simplicity pairing
/// `S_n = <psi_adj, psi>_1 - r tau_n e^{-i theta} intint u_r(x) K(x,y)
///  e^{ax+ay} conj(psi_adj)(x) psi(y) dy dx`.
pub fn compute_sn(
    hopf: &HopfData,
    u_r: &RealField,
    ops: &DiscreteOperators,
    n: usize,
) -> Result<Complex64> {
    let tau_n = hopf.tau_ladder[n];
    let phase = (-I * hopf.theta_r).exp();
    let first = ops.inner1(&hopf.psi_adj, &hopf.psi_r)?;
    let weighted = ComplexField::from_fn(ops.n_nodes(), |j, _| hopf.psi_adj[j] * u_r[j]);
    let double = ops.kernel_form3(
        &weighted,
        &to_complex(&RealField::from_element(ops.n_nodes(), 1.0)),
        &hopf.psi_r,
    );
    let s = first - hopf.r * tau_n * phase * double;
    if s.norm() < SIMPLICITY_MIN {
        return Err(Error::SimplicityViolated(s.norm()));
    }
    Ok(s)
}
