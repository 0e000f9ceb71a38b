//! Center-manifold normal form at a ladder delay `tau_n`.
//!
//! On the time-rescaled equation (`t -> t / tau_n`) the flow near `u_r`
//! reduces to `z' = i nu_r tau_n z + sum g_ij z^i conj(z)^j / (i! j!)`. The
//! cubic truncation needs four ingredients beyond the characteristic data:
//! the resolvent fields `E_r` and `F_r`, the second-order history
//! coefficients `w20`, `w11` evaluated at history points -1 and 0, the
//! quadratic/cubic coefficients `g20, g11, g02, g21`, and finally
//!
//! ```text
//! C1(0) = i/(2 nu_r tau_n) (g20 g11 - 2 |g11|^2 - |g02|^2 / 3) + g21 / 2.
//! ```
//!
//! `Re C1 < 0` makes the bifurcating orbit stable; with transversality
//! `Re mu'(tau_n) > 0`, `mu2 = -Re C1 / Re mu'` positive makes the branch
//! forward. The magnitudes of the coefficients depend on the eigenfunction
//! normalization (`|psi|_Y^2 = c0^2 L`, real positive mean); only the sign
//! of `Re C1` and of `mu2` are normalization-invariant.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::charpoint::{delta_matrix, HopfData};
use crate::discretize::{ComplexField, DiscreteOperators, RealField};
use crate::error::{Error, Result};
use crate::tolerances::NEAR_SINGULAR_COND;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Bifurcation direction in `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Orbital stability of the bifurcating periodic solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitStability {
    Stable,
    Unstable,
}

/// Everything the cubic normal form produces at one `(r, n)`.
#[derive(Debug, Clone)]
pub struct NormalFormData {
    pub n: usize,
    pub e_field: ComplexField,
    pub f_field: ComplexField,
    /// Mean coefficient of `E_r = b_r c0 + phi_r`.
    pub b_r: Complex64,
    /// Mean-zero part of `E_r`.
    pub phi_norm: f64,
    pub w20_at_0: ComplexField,
    pub w20_at_m1: ComplexField,
    pub w11_at_0: ComplexField,
    pub w11_at_m1: ComplexField,
    pub g20: Complex64,
    pub g11: Complex64,
    pub g02: Complex64,
    pub g21: Complex64,
    pub c1: Complex64,
    pub mu2: f64,
    pub direction: Direction,
    pub orbit_stability: OrbitStability,
}

/// Condition-checked complex LU solve; errors as near-singular when the
/// pivot spread of `U` exceeds the resonance threshold.
fn checked_solve(mat: DMatrix<Complex64>, rhs: &ComplexField) -> Result<ComplexField> {
    let lu = nalgebra::linalg::LU::new(mat);
    let u = lu.u();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for j in 0..u.nrows().min(u.ncols()) {
        let p = u[(j, j)].norm();
        dmin = dmin.min(p);
        dmax = dmax.max(p);
    }
    let cond = if dmin > 0.0 {
        dmax / dmin
    } else {
        f64::INFINITY
    };
    if cond > NEAR_SINGULAR_COND {
        return Err(Error::NearSingular(cond));
    }
    lu.solve(rhs).ok_or(Error::NearSingular(f64::INFINITY))
}

/// Solve for `E_r`: `Delta(r, 2 i nu_r, tau_n) E = 2 r e^{-i theta} psi (Kmat psi)`
/// and split off the mean coefficient `b_r`.
pub fn solve_er(
    hopf: &HopfData,
    u_r: &RealField,
    ops: &DiscreteOperators,
    n: usize,
) -> Result<(ComplexField, Complex64)> {
    let tau_n = hopf.tau_ladder[n];
    let mat = delta_matrix(hopf.r, 2.0 * I * hopf.nu_r, tau_n, u_r, ops);
    let kpsi = ops.kmat_apply(&hopf.psi_r);
    let phase = (-I * hopf.theta_r).exp();
    let rhs = ComplexField::from_fn(ops.n_nodes(), |j, _| {
        2.0 * hopf.r * phase * hopf.psi_r[j] * kpsi[j]
    });
    let e = checked_solve(mat, &rhs)?;
    let b_r = ops.mean_integral(&e) / (hopf.c0 * ops.grid.length);
    Ok((e, b_r))
}

/// Solve for `F_r`:
/// `Delta(r, 0, tau_n) F = r [e^{i theta} psi (Kmat conj psi) + e^{-i theta} conj(psi) (Kmat psi)]`.
pub fn solve_fr(
    hopf: &HopfData,
    u_r: &RealField,
    ops: &DiscreteOperators,
    n: usize,
) -> Result<ComplexField> {
    let tau_n = hopf.tau_ladder[n];
    let mat = delta_matrix(hopf.r, Complex64::new(0.0, 0.0), tau_n, u_r, ops);
    let psi_bar = hopf.psi_r.map(|v| v.conj());
    let kpsi = ops.kmat_apply(&hopf.psi_r);
    let kpsi_bar = ops.kmat_apply(&psi_bar);
    let ei = (I * hopf.theta_r).exp();
    let emi = ei.conj();
    let rhs = ComplexField::from_fn(ops.n_nodes(), |j, _| {
        hopf.r * (ei * hopf.psi_r[j] * kpsi_bar[j] + emi * psi_bar[j] * kpsi[j])
    });
    checked_solve(mat, &rhs)
}

/// Evaluate `w20` and `w11` at history points `0` and `-1` from the
/// quadratic coefficients and the resolvent fields:
///
/// ```text
/// w20(th) =  i g20/(nu tau) p(th) + i conj(g02)/(3 nu tau) conj(p)(th) + E e^{2 i nu tau th},
/// w11(th) = -i g11/(nu tau) p(th) + i conj(g11)/(nu tau) conj(p)(th) + F,
/// ```
///
/// with `p(th) = psi_r e^{i nu tau th}`.
#[allow(clippy::too_many_arguments)]
pub fn w_fields(
    hopf: &HopfData,
    n: usize,
    g20: Complex64,
    g11: Complex64,
    g02: Complex64,
    e_field: &ComplexField,
    f_field: &ComplexField,
) -> (ComplexField, ComplexField, ComplexField, ComplexField) {
    let omega = hopf.nu_r * hopf.tau_ladder[n];
    let psi = &hopf.psi_r;
    let psi_bar = psi.map(|v| v.conj());
    let emi = (-I * omega).exp();
    let ei = emi.conj();
    let c20 = I * g20 / omega;
    let c20b = I * g02.conj() / (3.0 * omega);
    let c11 = -I * g11 / omega;
    let c11b = I * g11.conj() / omega;
    let nn = psi.len();
    let w20_0 = ComplexField::from_fn(nn, |j, _| c20 * psi[j] + c20b * psi_bar[j] + e_field[j]);
    let w20_m1 = ComplexField::from_fn(nn, |j, _| {
        c20 * psi[j] * emi + c20b * psi_bar[j] * ei + e_field[j] * (-2.0 * I * omega).exp()
    });
    let w11_0 = ComplexField::from_fn(nn, |j, _| c11 * psi[j] + c11b * psi_bar[j] + f_field[j]);
    let w11_m1 = ComplexField::from_fn(nn, |j, _| {
        c11 * psi[j] * emi + c11b * psi_bar[j] * ei + f_field[j]
    });
    (w20_0, w20_m1, w11_0, w11_m1)
}

/// Compute the full coefficient set at ladder index `n`. `re_mu_prime` is
/// the transversality derivative (from the spectral oracle); it only enters
/// `mu2`, so any positive value preserves the direction verdict.
pub fn g_coefficients(
    hopf: &HopfData,
    u_r: &RealField,
    ops: &DiscreteOperators,
    n: usize,
    re_mu_prime: f64,
) -> Result<NormalFormData> {
    let tau_n = hopf.tau_ladder[n];
    let s_n = hopf.s_n[n];
    let omega = hopf.nu_r * tau_n;
    let ei = (I * hopf.theta_r).exp();
    let emi = ei.conj();
    let scale = hopf.r * tau_n / s_n;

    let psi = &hopf.psi_r;
    let psi_bar = psi.map(|v| v.conj());
    let tpsi = &hopf.psi_adj;

    let g20 = -2.0 * scale * emi * ops.kernel_form3(tpsi, psi, psi);
    let g11 = -scale
        * (ei * ops.kernel_form3(tpsi, psi, &psi_bar)
            + emi * ops.kernel_form3(tpsi, &psi_bar, psi));
    let g02 = -2.0 * scale * ei * ops.kernel_form3(tpsi, &psi_bar, &psi_bar);

    let (e_field, b_r) = solve_er(hopf, u_r, ops, n)?;
    let f_field = solve_fr(hopf, u_r, ops, n)?;
    let phi = {
        let mean_part = b_r * hopf.c0;
        ComplexField::from_fn(ops.n_nodes(), |j, _| e_field[j] - mean_part)
    };
    let phi_norm = ops.norm_y_sq(&phi).sqrt();

    let (w20_0, w20_m1, w11_0, w11_m1) = w_fields(hopf, n, g20, g11, g02, &e_field, &f_field);

    let g21 = -scale
        * (2.0 * ops.kernel_form3(tpsi, psi, &w11_m1)
            + ops.kernel_form3(tpsi, &psi_bar, &w20_m1)
            + ei * ops.kernel_form3(tpsi, &w20_0, &psi_bar)
            + 2.0 * emi * ops.kernel_form3(tpsi, &w11_0, psi));

    let c1 =
        I / (2.0 * omega) * (g20 * g11 - 2.0 * g11.norm_sqr() - g02.norm_sqr() / 3.0) + g21 / 2.0;

    let (mu2, direction, orbit_stability) = verdict(c1, re_mu_prime);

    Ok(NormalFormData {
        n,
        e_field,
        f_field,
        b_r,
        phi_norm,
        w20_at_0: w20_0,
        w20_at_m1: w20_m1,
        w11_at_0: w11_0,
        w11_at_m1: w11_m1,
        g20,
        g11,
        g02,
        g21,
        c1,
        mu2,
        direction,
        orbit_stability,
    })
}

/// `mu2 = -Re C1 / Re mu'` with the direction and stability flags.
pub fn verdict(c1: Complex64, re_mu_prime: f64) -> (f64, Direction, OrbitStability) {
    let mu2 = -c1.re / re_mu_prime;
    let direction = if mu2 > 0.0 {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let stability = if c1.re < 0.0 {
        OrbitStability::Stable
    } else {
        OrbitStability::Unstable
    };
    (mu2, direction, stability)
}

/// 16-point Gauss-Legendre rule mapped to `[-1, 0]` (exact through
/// polynomial degree 31; the duality integrands here are low-frequency
/// exponentials, so this is beyond machine precision for `nu tau < 20`).
pub(crate) fn gauss16_on_minus1_0() -> [(f64, f64); 16] {
    const X: [f64; 8] = [
        0.0950125098376374,
        0.2816035507792589,
        0.4580167776572274,
        0.6178762444026438,
        0.7554044083550030,
        0.8656312023878318,
        0.9445750230732326,
        0.9894009349916499,
    ];
    const W: [f64; 8] = [
        0.1894506104550685,
        0.1826034150449236,
        0.1691565193950025,
        0.1495959888165767,
        0.1246289712555339,
        0.0951585116824928,
        0.0622535239386479,
        0.0271524594117541,
    ];
    let mut rule = [(0.0, 0.0); 16];
    for k in 0..8 {
        rule[2 * k] = ((-X[k] - 1.0) / 2.0, W[k] / 2.0);
        rule[2 * k + 1] = ((X[k] - 1.0) / 2.0, W[k] / 2.0);
    }
    rule
}

/// The formal duality
/// `<<pt, p>> = <pt(0), p(0)>_1 - r tau int_{-1}^0 <pt(s+1), u_r Kmat p(s)>_1 ds`
/// with the s-integral by 16-point Gauss-Legendre.
pub fn formal_duality(
    ops: &DiscreteOperators,
    u_r: &RealField,
    r: f64,
    tau_n: f64,
    psi_tilde: &dyn Fn(f64) -> ComplexField,
    psi: &dyn Fn(f64) -> ComplexField,
) -> Complex64 {
    let head = ops
        .inner1(&psi_tilde(0.0), &psi(0.0))
        .expect("fields on the grid");
    let mut integral = Complex64::new(0.0, 0.0);
    for (s, w) in gauss16_on_minus1_0() {
        let left = psi_tilde(s + 1.0);
        let kp = ops.kmat_apply(&psi(s));
        let right = ComplexField::from_fn(ops.n_nodes(), |j, _| u_r[j] * kp[j]);
        integral += w * ops.inner1(&left, &right).expect("fields on the grid");
    }
    head - r * tau_n * integral
}
