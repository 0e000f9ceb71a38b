//! Independent spectral oracle for the linearization.
//!
//! The delay semigroup generator `A_tau(r)` acts on histories
//! `Psi: [-tau, 0] -> R^{N+1}` as differentiation in the history variable,
//! with the domain condition at 0 carrying the actual dynamics:
//!
//! ```text
//! Psi'(0) = e^{-ax} P0 Psi(0) + r Kt(r) Psi(0) - r u_r Kmat Psi(-tau).
//! ```
//!
//! Collocating at `M+1` Chebyshev-Gauss-Lobatto points in the history
//! variable turns characteristic-root finding into one dense nonsymmetric
//! eigenproblem of size `(N+1)(M+1)`; rightmost eigenvalues converge
//! spectrally in `M` for the smooth eigenfunctions at play. This route never
//! touches the characteristic-system solve, so counts and crossings from
//! here cross-check the `charpoint` results.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::charpoint::HopfData;
use crate::discretize::{DiscreteOperators, RealField};
use crate::error::{Error, Result};
use crate::tolerances::{SPECTRUM_TOL_ZERO, TRANSVERSALITY_REL_STEP};

/// Dense pseudospectral approximation of `A_tau(r)`.
pub struct GeneratorMatrix {
    pub mat: DMatrix<f64>,
    pub r: f64,
    pub tau: f64,
    /// Delay-collocation degree (M+1 points).
    pub m_colloc: usize,
    /// Spatial nodes per collocation point.
    pub n_space: usize,
}

/// Rightmost part of a computed spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Eigenvalues sorted by real part, descending.
    pub eigenvalues: Vec<Complex64>,
    /// Count with real part above the zero tolerance.
    pub n_unstable: usize,
    /// The rightmost eigenvalue and its conjugate partner.
    pub rightmost_pair: (Complex64, Complex64),
}

/// Chebyshev-Gauss-Lobatto differentiation matrix on `[-1, 1]` with nodes
/// `y_i = cos(i pi / M)` (decreasing), diagonal by the negative-sum trick.
fn chebyshev_diff(m: usize) -> DMatrix<f64> {
    let n = m + 1;
    let y: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::PI * i as f64 / m as f64).cos())
        .collect();
    let c = |i: usize| -> f64 {
        if i == 0 || i == m {
            2.0
        } else {
            1.0
        }
    };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (y[i] - y[j]);
            }
        }
    }
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if i != j {
                sum += d[(i, j)];
            }
        }
        d[(i, i)] = -sum;
    }
    d
}

/// The delay-free linearization matrix (the `tau = 0` case):
/// `e^{-ax} P0 + r D[Kt(r)] - r D[u_r] Kmat`.
pub fn delay_free_matrix(r: f64, u_r: &RealField, ops: &DiscreteOperators) -> DMatrix<f64> {
    let n = ops.n_nodes();
    let ku = &ops.kmat * u_r;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            a[(j, k)] = ops.p0[(j, k)] / ops.eax[j] - r * u_r[j] * ops.kmat[(j, k)];
        }
        a[(j, j)] += r * (ops.m_nodes[j] - ku[j]);
    }
    a
}

/// Build the collocated generator for `tau > 0` with `M >= 8` delay points.
pub fn build_generator(
    r: f64,
    tau: f64,
    u_r: &RealField,
    ops: &DiscreteOperators,
    m_colloc: usize,
) -> Result<GeneratorMatrix> {
    if m_colloc < 8 {
        return Err(Error::InvalidParams(format!(
            "need M >= 8 delay points, got {m_colloc}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParams("build_generator needs tau > 0".into()));
    }
    let n = ops.n_nodes();
    let mp1 = m_colloc + 1;
    let dim = n * mp1;
    // History points t_i = (tau/2)(cos(i pi / M) - 1): t_0 = 0, t_M = -tau.
    let dcheb = chebyshev_diff(m_colloc) * (2.0 / tau);

    let mut g = DMatrix::zeros(dim, dim);
    // Interior collocation rows: differentiation in the history variable.
    for i in 1..mp1 {
        for k in 0..mp1 {
            let d = dcheb[(i, k)];
            if d != 0.0 {
                for a in 0..n {
                    g[(i * n + a, k * n + a)] = d;
                }
            }
        }
    }
    // Domain-condition row block at the t = 0 point.
    let a0 = delay_free_matrix(r, u_r, ops);
    let ku_term = {
        // Split A0 into the instantaneous part and the delayed part so the
        // delayed coupling lands on the t = -tau block.
        let mut inst = a0;
        let mut delayed = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let d = -r * u_r[j] * ops.kmat[(j, k)];
                inst[(j, k)] -= d;
                delayed[(j, k)] = d;
            }
        }
        (inst, delayed)
    };
    let (inst, delayed) = ku_term;
    g.view_mut((0, 0), (n, n)).copy_from(&inst);
    g.view_mut((0, (mp1 - 1) * n), (n, n)).copy_from(&delayed);

    Ok(GeneratorMatrix {
        mat: g,
        r,
        tau,
        m_colloc,
        n_space: n,
    })
}

/// Eigenvalues of a dense real matrix, via faer's Hessenberg + shifted-QR
/// path, pinned to the sequential backend so results are bit-reproducible.
pub fn dense_eigenvalues(mat: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    static SEQ: std::sync::Once = std::sync::Once::new();
    SEQ.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    let n = mat.nrows();
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| mat[(i, j)]);
    fm.eigenvalues().map_err(|_| Error::QrNoConvergence)
}

/// The `k` rightmost eigenvalues with the unstable count.
pub fn rightmost_spectrum(gen: &GeneratorMatrix, k: usize) -> Result<SpectrumReport> {
    report_from_matrix(&gen.mat, k)
}

/// [`rightmost_spectrum`] on an arbitrary matrix (used for the `tau = 0`
/// delay-free case).
pub fn report_from_matrix(mat: &DMatrix<f64>, k: usize) -> Result<SpectrumReport> {
    let mut eigs = dense_eigenvalues(mat)?;
    eigs.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    let n_unstable = eigs.iter().filter(|e| e.re > SPECTRUM_TOL_ZERO).count();
    let rightmost = eigs[0];
    let partner = eigs
        .iter()
        .skip(1)
        .min_by(|a, b| {
            let da = (**a - rightmost.conj()).norm();
            let db = (**b - rightmost.conj()).norm();
            da.partial_cmp(&db).unwrap()
        })
        .copied()
        .unwrap_or(rightmost);
    let kept = eigs.into_iter().take(k).collect();
    Ok(SpectrumReport {
        eigenvalues: kept,
        n_unstable,
        rightmost_pair: (rightmost, partner),
    })
}

/// Count of eigenvalues with positive real part at a given delay.
pub fn unstable_count(
    r: f64,
    tau: f64,
    u_r: &RealField,
    ops: &DiscreteOperators,
    m_colloc: usize,
) -> Result<usize> {
    if tau == 0.0 {
        let report = report_from_matrix(&delay_free_matrix(r, u_r, ops), 8)?;
        return Ok(report.n_unstable);
    }
    let gen = build_generator(r, tau, u_r, ops, m_colloc)?;
    Ok(rightmost_spectrum(&gen, 8)?.n_unstable)
}

/// Track the eigenvalue closest to the target through one eigensolve.
fn matched_eigenvalue(mat: &DMatrix<f64>, target: Complex64, guard: f64) -> Result<Complex64> {
    let eigs = dense_eigenvalues(mat)?;
    let best = eigs
        .into_iter()
        .min_by(|a, b| {
            (a - target)
                .norm()
                .partial_cmp(&(b - target).norm())
                .unwrap()
        })
        .ok_or(Error::QrNoConvergence)?;
    if (best - target).norm() > guard {
        return Err(Error::PairTrackingLost(target.im));
    }
    Ok(best)
}

/// `d Re mu / d tau` at the ladder delay `tau_n` by central differences on
/// the tracked critical pair. Must come out positive at a genuine crossing.
pub fn transversality(
    hopf: &HopfData,
    u_r: &RealField,
    ops: &DiscreteOperators,
    n: usize,
    m_colloc: usize,
) -> Result<f64> {
    let tau_n = hopf.tau_ladder[n];
    let dtau = TRANSVERSALITY_REL_STEP * tau_n;
    let target = Complex64::new(0.0, hopf.nu_r);
    let guard = 0.1 * hopf.nu_r.abs().max(1e-6);
    let hi = build_generator(hopf.r, tau_n + dtau, u_r, ops, m_colloc)?;
    let lo = build_generator(hopf.r, tau_n - dtau, u_r, ops, m_colloc)?;
    let mu_hi = matched_eigenvalue(&hi.mat, target, guard)?;
    let mu_lo = matched_eigenvalue(&lo.mat, target, guard)?;
    Ok((mu_hi.re - mu_lo.re) / (2.0 * dtau))
}

/// Locate the delay where the unstable count flips `0 -> 2`, by bisection
/// inside `[tau_lo, tau_hi]`; the bracket must straddle the flip.
pub fn bisect_tau0(
    r: f64,
    u_r: &RealField,
    ops: &DiscreteOperators,
    m_colloc: usize,
    mut tau_lo: f64,
    mut tau_hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    let lo_count = unstable_count(r, tau_lo, u_r, ops, m_colloc)?;
    let hi_count = unstable_count(r, tau_hi, u_r, ops, m_colloc)?;
    if lo_count != 0 || hi_count == 0 {
        return Err(Error::HypothesisViolated(format!(
            "bracket [{tau_lo}, {tau_hi}] does not straddle the first crossing \
             (counts {lo_count} -> {hi_count})"
        )));
    }
    while (tau_hi - tau_lo) > rel_tol * tau_hi {
        let mid = 0.5 * (tau_lo + tau_hi);
        if unstable_count(r, mid, u_r, ops, m_colloc)? == 0 {
            tau_lo = mid;
        } else {
            tau_hi = mid;
        }
    }
    Ok(0.5 * (tau_lo + tau_hi))
}

/// Generator matrix for the scalar delayed-logistic reduction
/// (`K = delta`, `m = 1`, `alpha = 0`, `u_r = 1` collapses space to one
/// point with linearization `v' = -r v(t - tau)`). Used to validate the
/// collocation against the scalar characteristic equation.
pub fn scalar_generator(r: f64, tau: f64, m_colloc: usize) -> DMatrix<f64> {
    let mp1 = m_colloc + 1;
    let dcheb = chebyshev_diff(m_colloc) * (2.0 / tau);
    let mut g = DMatrix::zeros(mp1, mp1);
    for i in 1..mp1 {
        for k in 0..mp1 {
            g[(i, k)] = dcheb[(i, k)];
        }
    }
    g[(0, mp1 - 1)] = -r;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::assemble;
    use crate::model::{GrowthSpec, KernelSpec, ModelParams};
    use crate::scalarref;
    use crate::steady::continue_branch;

    fn params(n: usize) -> ModelParams {
        ModelParams {
            alpha: 0.0,
            length: 1.0,
            r: 0.1,
            tau: 0.0,
            growth: GrowthSpec::Constant { m0: 1.0 },
            kernel: KernelSpec::Delta,
            n_cells: n,
        }
    }

    #[test]
    fn chebyshev_differentiates_polynomials_exactly() {
        let m = 12;
        let d = chebyshev_diff(m);
        let y: Vec<f64> = (0..=m)
            .map(|i| (std::f64::consts::PI * i as f64 / m as f64).cos())
            .collect();
        // p(y) = y^3 - 2y, p'(y) = 3y^2 - 2.
        let p = nalgebra::DVector::from_fn(m + 1, |i, _| y[i].powi(3) - 2.0 * y[i]);
        let dp = &d * p;
        for i in 0..=m {
            let expect = 3.0 * y[i] * y[i] - 2.0;
            assert!((dp[i] - expect).abs() < 1e-10, "node {i}");
        }
    }

    #[test]
    fn scalar_reduction_matches_characteristic_roots() {
        // Hutchinson: roots of mu + r e^{-mu tau} = 0.
        let r = 0.1;
        let tau = std::f64::consts::FRAC_PI_2 / r; // r tau = pi/2: roots +- i r
        let g = scalar_generator(r, tau, 32);
        let report = report_from_matrix(&g, 4).unwrap();
        let (top, partner) = report.rightmost_pair;
        assert!((top.re).abs() < 1e-6);
        assert!((top.im.abs() - r).abs() < 1e-6);
        assert!((partner.conj() - top).norm() < 1e-6);

        // Against the Newton oracle at an off-critical delay.
        let tau2 = 12.0;
        let root = scalarref::hutchinson_root(r, tau2).unwrap();
        let g2 = scalar_generator(r, tau2, 32);
        let rep2 = report_from_matrix(&g2, 2).unwrap();
        assert!(
            (rep2.rightmost_pair.0 - root).norm() < 1e-6
                || (rep2.rightmost_pair.0 - root.conj()).norm() < 1e-6
        );
    }

    #[test]
    fn tau_to_zero_limit_matches_delay_free_matrix() {
        let p = params(24);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 0.1, 0.025).unwrap();
        let u_r = branch.state_at(0.1).unwrap();
        let free = report_from_matrix(&delay_free_matrix(0.1, u_r, &ops), 4).unwrap();
        let gen = build_generator(0.1, 1e-8, u_r, &ops, 12).unwrap();
        let with_delay = rightmost_spectrum(&gen, 4).unwrap();
        assert!(
            (free.rightmost_pair.0 - with_delay.rightmost_pair.0).norm() < 1e-5,
            "{} vs {}",
            free.rightmost_pair.0,
            with_delay.rightmost_pair.0
        );
    }

    #[test]
    fn collocation_self_convergence() {
        let p = params(24);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 0.1, 0.025).unwrap();
        let u_r = branch.state_at(0.1).unwrap();
        let tau = 10.0;
        let coarse =
            rightmost_spectrum(&build_generator(0.1, tau, u_r, &ops, 16).unwrap(), 2).unwrap();
        let fine =
            rightmost_spectrum(&build_generator(0.1, tau, u_r, &ops, 32).unwrap(), 2).unwrap();
        assert!((coarse.rightmost_pair.0 - fine.rightmost_pair.0).norm() < 1e-8);
    }

    #[test]
    fn conjugate_symmetry_of_reported_spectrum() {
        let p = params(16);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 0.1, 0.025).unwrap();
        let u_r = branch.state_at(0.1).unwrap();
        let gen = build_generator(0.1, 14.0, u_r, &ops, 16).unwrap();
        let eigs = dense_eigenvalues(&gen.mat).unwrap();
        for e in eigs.iter().filter(|e| e.im.abs() > 1e-12) {
            let has_conj = eigs
                .iter()
                .any(|f| (f - e.conj()).norm() < 1e-9 * e.norm().max(1.0));
            assert!(has_conj, "{e} lacks a conjugate partner");
        }
    }

    #[test]
    fn stability_counts_flip_at_hutchinson_threshold() {
        let p = params(16);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 0.1, 0.025).unwrap();
        let u_r = branch.state_at(0.1).unwrap();
        let tau0 = std::f64::consts::FRAC_PI_2 / 0.1;
        assert_eq!(unstable_count(0.1, 0.0, u_r, &ops, 16).unwrap(), 0);
        assert_eq!(unstable_count(0.1, 0.5 * tau0, u_r, &ops, 16).unwrap(), 0);
        assert_eq!(unstable_count(0.1, 1.2 * tau0, u_r, &ops, 16).unwrap(), 2);
    }

    #[test]
    fn transversality_matches_scalar_analytic_derivative() {
        let p = params(16);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 0.1, 0.025).unwrap();
        let u_r = branch.state_at(0.1).unwrap();
        let hopf = crate::charpoint::continue_char(&p, &ops, &branch, 0.1).unwrap();
        let numeric = transversality(&hopf, u_r, &ops, 0, 16).unwrap();
        // Scalar oracle: mu' = -mu^2 / (1 + mu tau) at mu = i r.
        let analytic =
            scalarref::hutchinson_dmu_dtau(Complex64::new(0.0, 0.1), hopf.tau_ladder[0]).re;
        assert!(numeric > 0.0);
        assert!(
            (numeric - analytic).abs() <= 1e-4 * analytic,
            "{numeric:.6e} vs {analytic:.6e}"
        );
        // The derivative estimate is stable against the step choice: redo
        // with a doubled relative step and compare signs and magnitude.
        let tau_n = hopf.tau_ladder[0];
        let dtau = 2.0 * crate::tolerances::TRANSVERSALITY_REL_STEP * tau_n;
        let target = Complex64::new(0.0, hopf.nu_r);
        let hi = build_generator(hopf.r, tau_n + dtau, u_r, &ops, 16).unwrap();
        let lo = build_generator(hopf.r, tau_n - dtau, u_r, &ops, 16).unwrap();
        let mu_hi = matched_eigenvalue(&hi.mat, target, 0.05).unwrap();
        let mu_lo = matched_eigenvalue(&lo.mat, target, 0.05).unwrap();
        let coarse = (mu_hi.re - mu_lo.re) / (2.0 * dtau);
        assert!(coarse > 0.0);
        assert!((coarse - numeric).abs() <= 1e-3 * numeric);
    }

    #[test]
    fn bisection_finds_hutchinson_tau0() {
        let p = params(16);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 0.1, 0.025).unwrap();
        let u_r = branch.state_at(0.1).unwrap();
        let tau0 = std::f64::consts::FRAC_PI_2 / 0.1;
        let found = bisect_tau0(0.1, u_r, &ops, 16, 0.7 * tau0, 1.4 * tau0, 1e-3).unwrap();
        assert!((found - tau0).abs() < 5e-3 * tau0, "{found} vs {tau0}");
    }
}
