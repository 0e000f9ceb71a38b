//! Discrete realization of the weighted diffusion operator, the weighted
//! inner product, and the nonlocal kernel operator on a uniform grid.
//!
//! The diffusion operator `P0 u = (e^{ax} u_x)_x` with no-flux boundaries is
//! assembled in conservative flux form over node-centered control volumes:
//!
//! ```text
//! (P0 u)_j = (F_{j+1/2} - F_{j-1/2}) / |V_j|,
//! F_{j+1/2} = e^{a x_{j+1/2}} (u_{j+1} - u_j) / dx,   F_{-1/2} = F_{N+1/2} = 0,
//! ```
//!
//! with `|V_j| = dx` in the interior and `dx/2` at the two boundary nodes.
//! This makes `P0 . const = 0` exact in floating point and makes `W P0`
//! (with `W` the trapezoid weights) exactly symmetric negative semidefinite,
//! which is what the whole bifurcation structure hangs on: the principal
//! eigenvalue is 0 with constant eigenfunction.
//!
//! Two different pairings coexist on purpose: the mean-zero subspace uses the
//! plain (unweighted) integral, while duality pairings use the
//! `e^{ax}`-weighted product `<u,v>_1 = int e^{ax} conj(u) v dx`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{KernelSpec, ModelParams};

/// Real-valued nodal field.
pub type RealField = DVector<f64>;
/// Complex-valued nodal field.
pub type ComplexField = DVector<Complex64>;

/// Uniform grid on `[0, L]` with trapezoid quadrature weights.
#[derive(Debug, Clone)]
pub struct Grid {
    pub length: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid {
    pub fn new(length: f64, n_cells: usize) -> Self {
        let dx = length / n_cells as f64;
        let nodes: Vec<f64> = (0..=n_cells).map(|j| j as f64 * dx).collect();
        let mut weights = vec![dx; n_cells + 1];
        weights[0] = 0.5 * dx;
        weights[n_cells] = 0.5 * dx;
        Grid {
            length,
            n_cells,
            dx,
            nodes,
            weights,
        }
    }

    /// Number of nodes (`n_cells + 1`).
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    /// Trapezoid quadrature of a real nodal field.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Kernel application matrix `u -> int K(x,y) e^{ay} u(y) dy`.
///
/// The delta kernel stays symbolic: the operator collapses to the diagonal
/// `e^{ax}` with no quadrature involved.
pub fn kernel_matrix(kernel: &KernelSpec, grid: &Grid, alpha: f64) -> Result<DMatrix<f64>> {
    let n = grid.n_nodes();
    let eay: Vec<f64> = grid.nodes.iter().map(|x| (alpha * x).exp()).collect();
    let mut k = DMatrix::zeros(n, n);
    match kernel {
        KernelSpec::Delta => {
            for j in 0..n {
                k[(j, j)] = eay[j];
            }
        }
        KernelSpec::Cumulative => {
            // Row j integrates over [0, x_j] with trapezoid weights of the
            // subinterval; row 0 is identically zero.
            for j in 1..n {
                k[(j, 0)] = 0.5 * grid.dx * eay[0];
                for col in 1..j {
                    k[(j, col)] = grid.dx * eay[col];
                }
                k[(j, j)] = 0.5 * grid.dx * eay[j];
            }
        }
        KernelSpec::Tabulated { matrix: rows } => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::LengthMismatch {
                    got: rows.len(),
                    want: n,
                });
            }
            for j in 0..n {
                for col in 0..n {
                    k[(j, col)] = rows[j][col] * grid.weights[col] * eay[col];
                }
            }
        }
    }
    Ok(k)
}

/// Grid, operators, and weights for one problem instance. Immutable after
/// assembly and safe to share across threads.
pub struct DiscreteOperators {
    pub grid: Grid,
    pub alpha: f64,
    /// Growth profile m at the nodes.
    pub m_nodes: RealField,
    /// Flux-form `(e^{ax} u_x)_x` with no-flux closure.
    pub p0: DMatrix<f64>,
    /// Face conductivities `e^{a x_{j+1/2}}` for the flux-form application.
    face: Vec<f64>,
    /// `u -> int K(x,y) e^{ay} u(y) dy` with quadrature folded in.
    pub kmat: DMatrix<f64>,
    /// `e^{ax_j}` at the nodes.
    pub eax: RealField,
    /// Weighted quadrature diagonal `e^{ax_j} w_j` realizing `<.,.>_1`.
    pub w1: RealField,
    /// Second eigenvalue of `-P0` (the first is 0, constant eigenfunction).
    pub lambda2: f64,
    /// LU of the bordered system `[[P0, 1], [w^T, 0]]` pinning the mean.
    bordered: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Build the discrete operators for a validated parameter set.
pub fn assemble(params: &ModelParams) -> Result<DiscreteOperators> {
    params.validate()?;
    let grid = Grid::new(params.length, params.n_cells);
    let n = grid.n_nodes();
    let alpha = params.alpha;
    let m_nodes = RealField::from_vec(params.growth.values_on(&grid.nodes, grid.length));

    let eax = RealField::from_fn(n, |j, _| (alpha * grid.nodes[j]).exp());
    let w1 = RealField::from_fn(n, |j, _| grid.weights[j] * eax[j]);

    // Flux-form P0 with half control volumes at the boundary nodes.
    let dx = grid.dx;
    let face: Vec<f64> = (0..grid.n_cells)
        .map(|j| (alpha * (grid.nodes[j] + 0.5 * dx)).exp())
        .collect();
    let mut p0 = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let vol = if j == 0 || j == n - 1 { 0.5 * dx } else { dx };
        if j > 0 {
            let a = face[j - 1] / (dx * vol);
            p0[(j, j - 1)] += a;
            p0[(j, j)] -= a;
        }
        if j + 1 < n {
            let a = face[j] / (dx * vol);
            p0[(j, j + 1)] += a;
            p0[(j, j)] -= a;
        }
    }

    let kmat = kernel_matrix(&params.kernel, &grid, alpha)?;

    // Second eigenvalue of -P0 against the quadrature mass, via the
    // similarity transform D[sqrt w] (-P0) D[1/sqrt w] which is symmetric.
    let sqw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::<f64>::from_fn(n, n, |i, j| -p0[(i, j)] * sqw[i] / sqw[j]);
    let sym = 0.5 * (&sym + sym.transpose());
    let mut eigs: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lambda2 = eigs[1];

    // Bordered system [[P0, 1], [w^T, 0]] for mean-pinned solves on X1.
    let mut bord = DMatrix::zeros(n + 1, n + 1);
    bord.view_mut((0, 0), (n, n)).copy_from(&p0);
    for j in 0..n {
        bord[(j, n)] = 1.0;
        bord[(n, j)] = grid.weights[j];
    }
    let bordered = nalgebra::linalg::LU::new(bord);

    Ok(DiscreteOperators {
        grid,
        alpha,
        m_nodes,
        p0,
        face,
        kmat,
        eax,
        w1,
        lambda2,
        bordered,
    })
}

/// Apply a real matrix to a complex field (split into two real products).
pub(crate) fn apply_re(m: &DMatrix<f64>, v: &ComplexField) -> ComplexField {
    let re = RealField::from_fn(v.len(), |j, _| v[j].re);
    let im = RealField::from_fn(v.len(), |j, _| v[j].im);
    let mre = m * re;
    let mim = m * im;
    ComplexField::from_fn(v.len(), |j, _| Complex64::new(mre[j], mim[j]))
}

/// Lift a real field into the complex node space.
pub(crate) fn to_complex(v: &RealField) -> ComplexField {
    ComplexField::from_fn(v.len(), |j, _| Complex64::new(v[j], 0.0))
}

impl DiscreteOperators {
    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_nodes() {
            return Err(Error::LengthMismatch {
                got: len,
                want: self.n_nodes(),
            });
        }
        Ok(())
    }

    /// Weighted inner product `<u,v>_1 = int e^{ax} conj(u) v dx`,
    /// conjugate-linear in the first argument.
    pub fn inner1(&self, u: &ComplexField, v: &ComplexField) -> Result<Complex64> {
        self.check_len(u.len())?;
        self.check_len(v.len())?;
        Ok((0..u.len()).map(|j| self.w1[j] * u[j].conj() * v[j]).sum())
    }

    /// Plain `L2` inner product `int conj(u) v dx` with trapezoid weights.
    pub fn inner_plain(&self, u: &ComplexField, v: &ComplexField) -> Complex64 {
        (0..u.len())
            .map(|j| self.grid.weights[j] * u[j].conj() * v[j])
            .sum()
    }

    /// Squared `L2(0,L)` norm (plain weights).
    pub fn norm_y_sq(&self, u: &ComplexField) -> f64 {
        (0..u.len())
            .map(|j| self.grid.weights[j] * u[j].norm_sqr())
            .sum()
    }

    /// Unweighted integral of a complex field.
    pub fn mean_integral(&self, u: &ComplexField) -> Complex64 {
        (0..u.len()).map(|j| self.grid.weights[j] * u[j]).sum()
    }

    /// Project onto the mean-zero subspace `X1` (unweighted integral).
    pub fn mean_zero_project(&self, u: &ComplexField) -> ComplexField {
        let c = self.mean_integral(u) / self.grid.length;
        ComplexField::from_fn(u.len(), |j, _| u[j] - c)
    }

    /// Solve `P0 z = rhs` for the unique mean-zero `z`, via the bordered
    /// system pinning the mean. The right side must already be (numerically)
    /// in the range of `P0`.
    pub fn solve_p0_on_x1(&self, rhs: &ComplexField) -> Result<ComplexField> {
        self.check_len(rhs.len())?;
        let norm = self.norm_y_sq(rhs).sqrt();
        let mean = self.mean_integral(rhs);
        if norm > 0.0 && mean.norm() > 1e-8 * norm {
            return Err(Error::NotInRange(mean.norm() / norm));
        }
        let n = self.n_nodes();
        let solve_real = |rhs_r: RealField| -> Result<RealField> {
            let mut aug = DVector::zeros(n + 1);
            aug.rows_mut(0, n).copy_from(&rhs_r);
            let sol = self
                .bordered
                .solve(&aug)
                .ok_or(Error::NearSingular(f64::INFINITY))?;
            Ok(sol.rows(0, n).into_owned())
        };
        let zr = solve_real(RealField::from_fn(n, |j, _| rhs[j].re))?;
        let zi = solve_real(RealField::from_fn(n, |j, _| rhs[j].im))?;
        Ok(ComplexField::from_fn(n, |j, _| {
            Complex64::new(zr[j], zi[j])
        }))
    }

    /// Flux-form application of `P0`: differences of face fluxes over the
    /// control volumes. A constant field gives exact zero fluxes, so
    /// `P0 . const = 0` holds bit-exactly; the assembled matrix gives the
    /// same values up to rounding and exists for Jacobians and solves.
    pub fn p0_apply(&self, u: &RealField) -> RealField {
        let n = self.n_nodes();
        let dx = self.grid.dx;
        RealField::from_fn(n, |j, _| {
            let f_right = if j + 1 < n {
                self.face[j] * (u[j + 1] - u[j]) / dx
            } else {
                0.0
            };
            let f_left = if j > 0 {
                self.face[j - 1] * (u[j] - u[j - 1]) / dx
            } else {
                0.0
            };
            let vol = if j == 0 || j == n - 1 { 0.5 * dx } else { dx };
            (f_right - f_left) / vol
        })
    }

    /// Flux-form application of `P0` to a complex field.
    pub fn p0_apply_complex(&self, u: &ComplexField) -> ComplexField {
        let n = self.n_nodes();
        let dx = self.grid.dx;
        ComplexField::from_fn(n, |j, _| {
            let f_right = if j + 1 < n {
                self.face[j] * (u[j + 1] - u[j]) / dx
            } else {
                Complex64::new(0.0, 0.0)
            };
            let f_left = if j > 0 {
                self.face[j - 1] * (u[j] - u[j - 1]) / dx
            } else {
                Complex64::new(0.0, 0.0)
            };
            let vol = if j == 0 || j == n - 1 { 0.5 * dx } else { dx };
            (f_right - f_left) / vol
        })
    }

    /// Kernel application on a complex field.
    pub fn kmat_apply(&self, v: &ComplexField) -> ComplexField {
        apply_re(&self.kmat, v)
    }

    /// `int K(x,y) e^{ay} dy` at the nodes (kernel row sums).
    pub fn kmat_one(&self) -> RealField {
        let ones = RealField::from_element(self.n_nodes(), 1.0);
        &self.kmat * ones
    }

    /// Total kernel mass `int int K(x,y) e^{ax+ay} dx dy`.
    pub fn kernel_mass(&self) -> f64 {
        let k1 = self.kmat_one();
        (0..self.n_nodes()).map(|j| self.w1[j] * k1[j]).sum()
    }

    /// Double-integral bilinear form
    /// `int int conj(a)(x) b(x) K(x,y) e^{ax+ay} c(y) dy dx`.
    ///
    /// All kernel double integrals in the pairing S_n and in the cubic
    /// coefficients reduce to this shape.
    pub fn kernel_form3(&self, a: &ComplexField, b: &ComplexField, c: &ComplexField) -> Complex64 {
        let kc = self.kmat_apply(c);
        (0..self.n_nodes())
            .map(|j| self.w1[j] * a[j].conj() * b[j] * kc[j])
            .sum()
    }

    /// Matrix of the transposed-kernel operator
    /// `psi -> int K(y,x) e^{ay} u(y) psi(y) dy`,
    /// built as the exact discrete adjoint of `u . (kmat .)` under `<.,.>_1`
    /// so that the duality identity holds to machine precision.
    pub fn adjoint_kernel_matrix(&self, u: &RealField) -> DMatrix<f64> {
        let n = self.n_nodes();
        DMatrix::from_fn(n, n, |k, j| {
            self.kmat[(j, k)] * self.w1[j] * u[j] / self.w1[k]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GrowthSpec, KernelSpec, ModelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, kernel: KernelSpec, n: usize) -> ModelParams {
        ModelParams {
            alpha,
            length: 1.0,
            r: 0.1,
            tau: 0.0,
            growth: GrowthSpec::Linear,
            kernel,
            n_cells: n,
        }
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ComplexField {
        ComplexField::from_fn(n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn p0_annihilates_constants_exactly() {
        for alpha in [0.0, 1.0, -2.0] {
            let ops = assemble(&params(alpha, KernelSpec::Delta, 64)).unwrap();
            let c = RealField::from_element(ops.n_nodes(), 3.7);
            let out = ops.p0_apply(&c);
            assert!(out.iter().all(|v| *v == 0.0), "alpha = {alpha}");
            // The assembled matrix agrees with the flux application up to
            // rounding of the precombined diagonal.
            let mat = &ops.p0 * c;
            assert!(mat.amax() <= 1e-9 * ops.p0.norm(), "alpha = {alpha}");
        }
    }

    #[test]
    fn p0_interior_row_is_three_point_laplacian_at_zero_advection() {
        let ops = assemble(&params(0.0, KernelSpec::Delta, 16)).unwrap();
        let dx2 = ops.grid.dx * ops.grid.dx;
        for j in 5..7 {
            assert!((ops.p0[(j, j - 1)] * dx2 - 1.0).abs() < 1e-13);
            assert!((ops.p0[(j, j)] * dx2 + 2.0).abs() < 1e-13);
            assert!((ops.p0[(j, j + 1)] * dx2 - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn p0_symmetric_bilinear_form_and_nonpositive() {
        let ops = assemble(&params(1.3, KernelSpec::Delta, 48)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u = RealField::from_fn(ops.n_nodes(), |_, _| rng.random_range(-1.0..1.0));
            let v = RealField::from_fn(ops.n_nodes(), |_, _| rng.random_range(-1.0..1.0));
            let pu = ops.p0_apply(&u);
            let pv = ops.p0_apply(&v);
            let lhs: f64 = (0..u.len())
                .map(|j| ops.grid.weights[j] * v[j] * pu[j])
                .sum();
            let rhs: f64 = (0..u.len())
                .map(|j| ops.grid.weights[j] * u[j] * pv[j])
                .sum();
            let scale = u.norm() * v.norm();
            assert!((lhs - rhs).abs() <= 1e-12 * scale * ops.p0.norm());
            let quad: f64 = (0..u.len())
                .map(|j| ops.grid.weights[j] * u[j] * pu[j])
                .sum();
            assert!(quad <= 1e-12 * scale * ops.p0.norm());
        }
    }

    #[test]
    fn lambda1_is_zero_and_lambda2_positive() {
        let ops = assemble(&params(0.7, KernelSpec::Delta, 64)).unwrap();
        assert!(ops.lambda2 > 0.0);
        // alpha = 0: second Neumann eigenvalue of -u'' on (0,1) is pi^2.
        let ops0 = assemble(&params(0.0, KernelSpec::Delta, 256)).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((ops0.lambda2 - pi2).abs() < 1e-3 * pi2);
    }

    #[test]
    fn lem21_coercivity_on_random_mean_zero_fields() {
        let ops = assemble(&params(1.0, KernelSpec::Delta, 48)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let z = ops.mean_zero_project(&random_field(&mut rng, ops.n_nodes()));
            let pz = apply_re(&ops.p0, &z);
            let quad = ops.inner_plain(&z, &pz).re.abs();
            let nrm = ops.norm_y_sq(&z);
            assert!(quad >= ops.lambda2 * nrm * (1.0 - 1e-10));
        }
    }

    #[test]
    fn inner1_weighted_values() {
        let ops = assemble(&params(0.0, KernelSpec::Delta, 64)).unwrap();
        let one = ComplexField::from_element(ops.n_nodes(), Complex64::new(1.0, 0.0));
        assert!((ops.inner1(&one, &one).unwrap().re - 1.0).abs() < 1e-14);

        let ops1 = assemble(&params(1.0, KernelSpec::Delta, 512)).unwrap();
        let one = ComplexField::from_element(ops1.n_nodes(), Complex64::new(1.0, 0.0));
        let expect = std::f64::consts::E - 1.0;
        assert!((ops1.inner1(&one, &one).unwrap().re - expect).abs() < 1e-6);
    }

    #[test]
    fn inner1_sandwich_bound() {
        let ops = assemble(&params(0.8, KernelSpec::Delta, 32)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eal = (0.8f64).exp();
        for _ in 0..20 {
            let v = random_field(&mut rng, ops.n_nodes());
            let plain = ops.norm_y_sq(&v);
            let weighted = ops.inner1(&v, &v).unwrap().re;
            assert!(plain <= weighted * (1.0 + 1e-12));
            assert!(weighted <= eal * plain * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mean_zero_projection_properties() {
        let ops = assemble(&params(0.9, KernelSpec::Delta, 64)).unwrap();
        let n = ops.n_nodes();
        let c = ComplexField::from_element(n, Complex64::new(2.5, -1.0));
        let pc = ops.mean_zero_project(&c);
        assert!(pc.iter().all(|v| v.norm() < 1e-14));

        // u = x on (0,1) projects to x - 1/2.
        let x = ComplexField::from_fn(n, |j, _| Complex64::new(ops.grid.nodes[j], 0.0));
        let px = ops.mean_zero_project(&x);
        for j in 0..n {
            assert!((px[j].re - (ops.grid.nodes[j] - 0.5)).abs() < 1e-13);
        }
        // Idempotent.
        let ppx = ops.mean_zero_project(&px);
        for j in 0..n {
            assert!((ppx[j] - px[j]).norm() < 1e-14);
        }
    }

    #[test]
    fn solve_p0_on_x1_roundtrip_and_eigenfunction() {
        let ops = assemble(&params(0.6, KernelSpec::Delta, 96)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let z = ops.mean_zero_project(&random_field(&mut rng, ops.n_nodes()));
        let rhs = apply_re(&ops.p0, &z);
        let back = ops.solve_p0_on_x1(&rhs).unwrap();
        for j in 0..ops.n_nodes() {
            assert!((back[j] - z[j]).norm() < 1e-10);
        }
        // rhs = 0 gives z = 0.
        let zero = ComplexField::from_element(ops.n_nodes(), Complex64::new(0.0, 0.0));
        let out = ops.solve_p0_on_x1(&zero).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));

        // Neumann eigenfunction: z'' = -pi^2 cos(pi x) recovers cos(pi x)
        // up to the O(dx^2) discretization of the eigenvalue.
        let ops0 = assemble(&params(0.0, KernelSpec::Delta, 512)).unwrap();
        let pi = std::f64::consts::PI;
        let rhs = ComplexField::from_fn(ops0.n_nodes(), |j, _| {
            Complex64::new(-pi * pi * (pi * ops0.grid.nodes[j]).cos(), 0.0)
        });
        let z = ops0.solve_p0_on_x1(&rhs).unwrap();
        for j in 0..ops0.n_nodes() {
            let expect = (pi * ops0.grid.nodes[j]).cos();
            assert!((z[j].re - expect).abs() < 5e-5);
        }
    }

    #[test]
    fn not_in_range_rejected() {
        let ops = assemble(&params(0.0, KernelSpec::Delta, 16)).unwrap();
        let one = ComplexField::from_element(ops.n_nodes(), Complex64::new(1.0, 0.0));
        assert!(matches!(
            ops.solve_p0_on_x1(&one),
            Err(Error::NotInRange(_))
        ));
    }

    #[test]
    fn cumulative_kernel_partial_sums() {
        let ops = assemble(&params(0.0, KernelSpec::Cumulative, 64)).unwrap();
        let k1 = ops.kmat_one();
        for j in 0..ops.n_nodes() {
            assert!((k1[j] - ops.grid.nodes[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn cumulative_kernel_mass_matches_analytic() {
        let alpha: f64 = 0.9;
        let l: f64 = 1.0;
        let analytic = ((2.0 * alpha * l).exp() - 1.0) / (2.0 * alpha * alpha)
            - ((alpha * l).exp() - 1.0) / (alpha * alpha);
        let coarse = assemble(&params(alpha, KernelSpec::Cumulative, 128)).unwrap();
        let fine = assemble(&params(alpha, KernelSpec::Cumulative, 256)).unwrap();
        let e_coarse = (coarse.kernel_mass() - analytic).abs();
        let e_fine = (fine.kernel_mass() - analytic).abs();
        assert!(e_coarse < 1e-4);
        assert!(
            e_coarse / e_fine > 3.5,
            "O(dx^2): {e_coarse:.3e} vs {e_fine:.3e}"
        );
    }

    #[test]
    fn tabulated_kernel_quadrature() {
        // K = 1 everywhere: the kernel application of any field is the
        // constant int e^{ay} u dy, and the mass is (int e^{ax})^2.
        let n = 48;
        let ones = vec![vec![1.0; n + 1]; n + 1];
        let p = ModelParams {
            alpha: 0.7,
            length: 1.0,
            r: 0.1,
            tau: 0.0,
            growth: GrowthSpec::Constant { m0: 1.0 },
            kernel: KernelSpec::Tabulated { matrix: ones },
            n_cells: n,
        };
        let ops = assemble(&p).unwrap();
        let k1 = ops.kmat_one();
        let expect: f64 = ops.w1.iter().sum();
        for j in 0..ops.n_nodes() {
            assert!((k1[j] - expect).abs() < 1e-13);
        }
        assert!((ops.kernel_mass() - expect * expect).abs() < 1e-12);
    }

    #[test]
    fn weighted_self_adjointness_of_diffusion() {
        // e^{-ax} P0 is self-adjoint under <.,.>_1.
        let ops = assemble(&params(1.1, KernelSpec::Delta, 48)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let emx = RealField::from_fn(ops.n_nodes(), |j, _| (-ops.alpha * ops.grid.nodes[j]).exp());
        for _ in 0..10 {
            let u = random_field(&mut rng, ops.n_nodes());
            let v = random_field(&mut rng, ops.n_nodes());
            let au = apply_re(&ops.p0, &u).component_mul(&to_complex(&emx));
            let av = apply_re(&ops.p0, &v).component_mul(&to_complex(&emx));
            let lhs = ops.inner1(&v, &au).unwrap();
            let rhs = ops.inner1(&av, &u).unwrap();
            let scale = ops.norm_y_sq(&u).sqrt() * ops.norm_y_sq(&v).sqrt() * ops.p0.norm();
            assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn adjoint_kernel_is_exact_discrete_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for kernel in [KernelSpec::Delta, KernelSpec::Cumulative] {
            let ops = assemble(&params(0.9, kernel, 40)).unwrap();
            let u = RealField::from_fn(ops.n_nodes(), |j, _| 1.0 + 0.3 * ops.grid.nodes[j]);
            let adj = ops.adjoint_kernel_matrix(&u);
            for _ in 0..10 {
                let a = random_field(&mut rng, ops.n_nodes());
                let b = random_field(&mut rng, ops.n_nodes());
                // <a, u * kmat b>_1 == <adj a, b>_1
                let ukb = ops.kmat_apply(&b).component_mul(&to_complex(&u));
                let lhs = ops.inner1(&a, &ukb).unwrap();
                let adj_a = apply_re(&adj, &a);
                let rhs = ops.inner1(&adj_a, &b).unwrap();
                assert!((lhs - rhs).norm() < 1e-12 * (lhs.norm() + 1.0));
            }
        }
    }
}
