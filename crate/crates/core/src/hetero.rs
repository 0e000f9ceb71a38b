//! Spatial-heterogeneity sweeps: `tau_0` asymptotics and the effect of
//! advection and domain scale on the first Hopf delay.
//!
//! For small `r` the first Hopf delay behaves as
//! `tau_0(r, alpha, L) ~ pi / (2 r h0(alpha, L))`, so orderings in `tau_0`
//! at small `r` follow orderings of the growth average `h0`. The sweep
//! machinery computes both: the cheap `h0` tables with derivative signs, and
//! the exact `tau_0` through the characteristic solve for pairwise
//! comparisons. "There exists r~ > 0" claims are probed at fixed descending
//! `r` values rather than certified; the comparisons report the ordering at
//! the `r` they were given.

use std::cmp::Ordering;

use crate::charpoint::{continue_char, HopfData};
use crate::discretize::{assemble, Grid};
use crate::error::{Error, Result};
use crate::model::{GrowthSpec, ModelParams};
use crate::steady::continue_branch;
use crate::tolerances::H0_DERIVATIVE_STEP;

/// One cell of a sweep table.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub alpha: f64,
    pub length: f64,
    pub r: f64,
    pub h0: f64,
    pub dh0_dalpha: f64,
    pub dh0_dlength: f64,
    /// Crossing data, when the cell ran the characteristic solve.
    pub theta_r: Option<f64>,
    pub h_r: Option<f64>,
    pub tau0: Option<f64>,
    /// Error tag for failed cells; the table stays rectangular.
    pub error: Option<String>,
}

/// Rectangular sweep output (row-major over `alphas x lengths`).
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub alphas: Vec<f64>,
    pub lengths: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

/// Leading-order first Hopf delay `pi / (2 r h0)`.
pub fn tau0_asymptotic(params: &ModelParams) -> Result<f64> {
    let h0 = crate::model::h0(params)?;
    if !(h0 > 0.0) {
        return Err(Error::InvalidParams(format!("h0 = {h0} must be positive")));
    }
    Ok(std::f64::consts::FRAC_PI_2 / (params.r * h0))
}

/// Exact `tau_0` at `params.r` through the steady branch and the
/// characteristic solve. The continuation step is chosen to land on `r`
/// exactly.
pub fn tau0_exact(params: &ModelParams) -> Result<(f64, HopfData)> {
    let ops = assemble(params)?;
    let steps = (params.r / 0.0125).ceil().max(1.0);
    let dr = params.r / steps;
    let branch = continue_branch(params, &ops, params.r, dr)?;
    let hopf = continue_char(params, &ops, &branch, params.r)?;
    Ok((hopf.tau(0), hopf))
}

/// Outcome of a pairwise `tau_0` comparison.
#[derive(Debug, Clone)]
pub struct ComparisonVerdict {
    pub tau0_first: f64,
    pub tau0_second: f64,
    /// Ordering of `tau0_first` against `tau0_second`.
    pub ordering: Ordering,
    /// Set when a proposition-mode hypothesis integral was within
    /// tolerance of zero (ordering still reported).
    pub marginal: bool,
}

fn ordering_of(a: f64, b: f64) -> Ordering {
    let scale = a.abs().max(b.abs()).max(1e-300);
    if (a - b).abs() <= 1e-6 * scale {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Compare `tau_0` at two advection rates (`alpha1 > alpha2`), same profile,
/// scale, and `r`.
pub fn compare_advection(
    growth: &GrowthSpec,
    alpha1: f64,
    alpha2: f64,
    length: f64,
    r: f64,
    n_cells: usize,
) -> Result<ComparisonVerdict> {
    if alpha1 <= alpha2 {
        return Err(Error::HypothesisViolated(format!(
            "need alpha1 > alpha2, got {alpha1} <= {alpha2}"
        )));
    }
    let base = ModelParams {
        alpha: alpha1,
        length,
        r,
        tau: 0.0,
        growth: growth.clone(),
        kernel: crate::model::KernelSpec::Delta,
        n_cells,
    };
    let (tau_a, _) = tau0_exact(&base)?;
    let mut second = base.clone();
    second.alpha = alpha2;
    let (tau_b, _) = tau0_exact(&second)?;
    Ok(ComparisonVerdict {
        tau0_first: tau_a,
        tau0_second: tau_b,
        ordering: ordering_of(tau_a, tau_b),
        marginal: false,
    })
}

/// Compare `tau_0` at two domain scales (`l1 > l2`), same profile,
/// advection, and `r`. With `proposition_mode` the hypothesis
/// "m nonconstant with max at x = L" is enforced and its integrand
/// positivity `int [m(L) - m(x)] e^{ax} dx > 0` checked for both scales.
pub fn compare_scale(
    growth: &GrowthSpec,
    l1: f64,
    l2: f64,
    alpha: f64,
    r: f64,
    n_cells: usize,
    proposition_mode: bool,
) -> Result<ComparisonVerdict> {
    if l1 <= l2 {
        return Err(Error::HypothesisViolated(format!(
            "need L1 > L2, got {l1} <= {l2}"
        )));
    }
    let mut marginal = false;
    if proposition_mode {
        for l in [l1, l2] {
            let grid = Grid::new(l, n_cells);
            let m = growth.values_on(&grid.nodes, l);
            let m_end = *m.last().unwrap();
            let m_max = m.iter().cloned().fold(f64::MIN, f64::max);
            let m_min = m.iter().cloned().fold(f64::MAX, f64::min);
            if m_end < m_max - 1e-12 {
                return Err(Error::HypothesisViolated(format!(
                    "m does not attain its maximum at x = L (m(L) = {m_end}, max = {m_max})"
                )));
            }
            if m_max - m_min <= 1e-12 {
                return Err(Error::HypothesisViolated("m is constant".into()));
            }
            let integrand: f64 = (0..grid.n_nodes())
                .map(|j| grid.weights[j] * (m_end - m[j]) * (alpha * grid.nodes[j]).exp())
                .sum();
            if integrand < -1e-12 {
                return Err(Error::HypothesisViolated(format!(
                    "hypothesis integrand negative: {integrand:.3e}"
                )));
            }
            if integrand.abs() <= 1e-12 {
                marginal = true;
            }
        }
    }
    let base = ModelParams {
        alpha,
        length: l1,
        r,
        tau: 0.0,
        growth: growth.clone(),
        kernel: crate::model::KernelSpec::Delta,
        n_cells,
    };
    let (tau_a, _) = tau0_exact(&base)?;
    let mut second = base.clone();
    second.length = l2;
    let (tau_b, _) = tau0_exact(&second)?;
    Ok(ComparisonVerdict {
        tau0_first: tau_a,
        tau0_second: tau_b,
        ordering: ordering_of(tau_a, tau_b),
        marginal,
    })
}

fn h0_at(growth: &GrowthSpec, alpha: f64, length: f64, n_cells: usize) -> f64 {
    let grid = Grid::new(length, n_cells);
    let m = growth.values_on(&grid.nodes, length);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..grid.n_nodes() {
        let w1 = grid.weights[j] * (alpha * grid.nodes[j]).exp();
        num += w1 * m[j];
        den += w1;
    }
    num / den
}

/// Richardson-refined central difference of `f` at `x` with base step `h`.
fn central_diff(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |hh: f64| (f(x + hh) - f(x - hh)) / (2.0 * hh);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Tabulate `h0` and its derivative signs over an `(alpha, L)` grid, and
/// assert the sign pattern the growth profile implies:
/// linear -> both positive; decreasing linear -> both negative; sine ->
/// both negative where `alpha L > pi` (no assertion elsewhere); constant ->
/// both zero.
pub fn monotonicity_scan(
    growth: &GrowthSpec,
    alphas: &[f64],
    lengths: &[f64],
    n_cells: usize,
) -> Result<SweepTable> {
    if alphas.is_empty() || lengths.is_empty() {
        return Err(Error::InvalidParams("empty scan grid".into()));
    }
    let items: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|a| lengths.iter().map(move |l| (*a, *l)))
        .collect();
    let cells: Vec<SweepCell> = crate::par::map(items, |(alpha, length)| {
        let h = H0_DERIVATIVE_STEP;
        let h0 = h0_at(growth, alpha, length, n_cells);
        let da = central_diff(&|a| h0_at(growth, a, length, n_cells), alpha, h);
        let dl = central_diff(&|l| h0_at(growth, alpha, l, n_cells), length, h);
        SweepCell {
            alpha,
            length,
            r: 0.0,
            h0,
            dh0_dalpha: da,
            dh0_dlength: dl,
            theta_r: None,
            h_r: None,
            tau0: None,
            error: None,
        }
    });

    let mut offenders = Vec::new();
    for cell in &cells {
        let bad = match growth {
            GrowthSpec::Linear => cell.dh0_dalpha <= 0.0 || cell.dh0_dlength <= 0.0,
            GrowthSpec::LinearDecreasing { m0 } => {
                if cell.length >= *m0 {
                    true
                } else {
                    cell.dh0_dalpha >= 0.0 || cell.dh0_dlength >= 0.0
                }
            }
            GrowthSpec::SinePeak => {
                if cell.alpha * cell.length > std::f64::consts::PI {
                    cell.dh0_dalpha >= 0.0 || cell.dh0_dlength >= 0.0
                } else {
                    false
                }
            }
            GrowthSpec::Constant { .. } => {
                cell.dh0_dalpha.abs() > 1e-10 || cell.dh0_dlength.abs() > 1e-10
            }
            GrowthSpec::Tabulated { .. } => false,
        };
        if bad {
            offenders.push(format!("(alpha={}, L={})", cell.alpha, cell.length));
        }
    }
    if !offenders.is_empty() {
        let count = offenders.len();
        let list = offenders.join(", ");
        return Err(Error::SignViolation { count, cells: list });
    }
    Ok(SweepTable {
        alphas: alphas.to_vec(),
        lengths: lengths.to_vec(),
        cells,
    })
}

/// Full `tau_0` sweep over an `(alpha, L)` grid at fixed `r`; failed cells
/// carry their error tag instead of aborting the table.
pub fn tau0_sweep(
    growth: &GrowthSpec,
    kernel: &crate::model::KernelSpec,
    alphas: &[f64],
    lengths: &[f64],
    r: f64,
    n_cells: usize,
) -> SweepTable {
    let items: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|a| lengths.iter().map(move |l| (*a, *l)))
        .collect();
    let growth = growth.clone();
    let kernel = kernel.clone();
    let cells: Vec<SweepCell> = crate::par::map(items, move |(alpha, length)| {
        let params = ModelParams {
            alpha,
            length,
            r,
            tau: 0.0,
            growth: growth.clone(),
            kernel: kernel.clone(),
            n_cells,
        };
        let h0 = h0_at(&growth, alpha, length, n_cells);
        let h = H0_DERIVATIVE_STEP;
        let da = central_diff(&|a| h0_at(&growth, a, length, n_cells), alpha, h);
        let dl = central_diff(&|l| h0_at(&growth, alpha, l, n_cells), length, h);
        let mut cell = SweepCell {
            alpha,
            length,
            r,
            h0,
            dh0_dalpha: da,
            dh0_dlength: dl,
            theta_r: None,
            h_r: None,
            tau0: None,
            error: None,
        };
        match tau0_exact(&params) {
            Ok((tau0, hopf)) => {
                cell.tau0 = Some(tau0);
                cell.theta_r = Some(hopf.theta_r);
                cell.h_r = Some(hopf.h_r);
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cell
    });
    SweepTable {
        alphas: alphas.to_vec(),
        lengths: lengths.to_vec(),
        cells,
    }
}
