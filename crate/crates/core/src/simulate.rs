//! Time-domain integration of the full nonlinear delay PDE with history,
//! plus oscillation diagnostics.
//!
//! The stepper is Crank-Nicolson on the diffusion `e^{-ax} P0` (one LU,
//! factored once) with second-order Adams-Bashforth on the reaction
//! `r u (m - Kmat u(t - tau))`. The step is tied to the delay,
//! `dt = tau / m_delay`, so the delayed state is read straight off the ring
//! buffer with no interpolation; the first step bootstraps the reaction with
//! an explicit Euler half-order step.
//!
//! Diagnostics separate two signals: the decay verdict uses the sup-norm
//! distance to the steady state, while peaks, period, and amplitude are
//! measured on the signed spatial-mean deviation `(1/L) int (u - u_r) dx`.
//! A norm is rectified and would peak twice per period near a Hopf orbit;
//! the signed projection oscillates at the orbit frequency itself.

use nalgebra::DMatrix;

use crate::discretize::{DiscreteOperators, RealField};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tolerances::{
    SIM_BLOWUP, SIM_DECAY_TOL, SIM_DELAY_STEPS, SIM_MIN_AMPLITUDE, SIM_PEAK_AGREEMENT,
};

/// Ring of past states spanning exactly `[t - tau, t]`.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    states: Vec<RealField>,
    /// Index of the oldest entry, the `t - tau` state.
    head: usize,
}

impl HistoryBuffer {
    /// Fill from a history function `eta(s)`, `s` in `[-tau, 0]`, sampled at
    /// the `m_delay + 1` step points.
    pub fn from_history(eta: &dyn Fn(f64) -> RealField, tau: f64, m_delay: usize) -> Self {
        let dt = tau / m_delay as f64;
        let states: Vec<RealField> = (0..=m_delay).map(|k| eta(-tau + k as f64 * dt)).collect();
        HistoryBuffer { states, head: 0 }
    }

    /// The `t - tau` state.
    pub fn oldest(&self) -> &RealField {
        &self.states[self.head]
    }

    /// The current (`t`) state.
    pub fn newest(&self) -> &RealField {
        let n = self.states.len();
        &self.states[(self.head + n - 1) % n]
    }

    /// Push the next state, dropping the oldest.
    pub fn push(&mut self, state: RealField) {
        self.states[self.head] = state;
        self.head = (self.head + 1) % self.states.len();
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Precomputed IMEX stepper for one `(params, dt)`.
pub struct Stepper {
    pub dt: f64,
    r: f64,
    lhs: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs_mat: DMatrix<f64>,
}

impl Stepper {
    pub fn new(r: f64, dt: f64, ops: &DiscreteOperators) -> Self {
        let n = ops.n_nodes();
        let mut diffusion = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                diffusion[(j, k)] = ops.p0[(j, k)] / ops.eax[j];
            }
        }
        let identity = DMatrix::<f64>::identity(n, n);
        let lhs = &identity - (dt / 2.0) * &diffusion;
        let rhs_mat = &identity + (dt / 2.0) * &diffusion;
        Stepper {
            dt,
            r,
            lhs: nalgebra::linalg::LU::new(lhs),
            rhs_mat,
        }
    }

    /// Reaction term `r u (m - Kmat u_delayed)`.
    pub fn reaction(
        &self,
        u: &RealField,
        u_delayed: &RealField,
        ops: &DiscreteOperators,
    ) -> RealField {
        let ku = &ops.kmat * u_delayed;
        RealField::from_fn(u.len(), |j, _| self.r * u[j] * (ops.m_nodes[j] - ku[j]))
    }

    /// One CN/AB2 step. `reaction_prev` is the reaction at the previous
    /// step; `None` on the first step selects the Euler bootstrap.
    pub fn step(
        &self,
        u: &RealField,
        u_delayed: &RealField,
        reaction_prev: Option<&RealField>,
        ops: &DiscreteOperators,
    ) -> Result<(RealField, RealField)> {
        let rnow = self.reaction(u, u_delayed, ops);
        let explicit = match reaction_prev {
            Some(prev) => {
                RealField::from_fn(u.len(), |j, _| self.dt * (1.5 * rnow[j] - 0.5 * prev[j]))
            }
            None => self.dt * &rnow,
        };
        let rhs = &self.rhs_mat * u + explicit;
        let next = self
            .lhs
            .solve(&rhs)
            .ok_or(Error::NearSingular(f64::INFINITY))?;
        let sup = next.amax();
        if !sup.is_finite() || sup > SIM_BLOWUP {
            return Err(Error::BlowUp(sup));
        }
        Ok((next, rnow))
    }
}

/// Trajectory classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decayed,
    Oscillating,
    Indeterminate,
}

/// Oscillation diagnostics extracted from a trace.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub verdict: Verdict,
    /// Mean of the last peak-to-peak amplitudes of the projection signal.
    pub amplitude: f64,
    /// Mean spacing of the late maxima (quadratic peak interpolation).
    pub period: f64,
    pub final_distance_to_steady: f64,
}

/// Time series of the delay-PDE solution with diagnostics.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub times: Vec<f64>,
    /// `L2` norm of the state at each sample.
    pub norms: Vec<f64>,
    /// Signed spatial-mean deviation from the steady state.
    pub mean_dev: Vec<f64>,
    /// Sup-norm distance to the steady state.
    pub sup_dist: Vec<f64>,
    pub snapshots: Vec<(f64, RealField)>,
    pub diagnostics: Diagnostics,
}

/// Options for [`run`].
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub t_end: f64,
    /// Steps per delay interval (`dt = tau / m_delay`).
    pub m_delay: usize,
    /// Step used when `tau = 0` (no delay to derive `dt` from).
    pub dt_no_delay: f64,
    pub snapshot_times: Vec<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            t_end: 500.0,
            m_delay: SIM_DELAY_STEPS,
            dt_no_delay: 0.05,
            snapshot_times: Vec::new(),
        }
    }
}

/// Quadratically interpolated local maxima of a uniformly sampled signal:
/// returns `(time, value)` pairs.
fn refined_maxima(times: &[f64], signal: &[f64]) -> Vec<(f64, f64)> {
    let mut peaks = Vec::new();
    for k in 1..signal.len().saturating_sub(1) {
        if signal[k] > signal[k - 1] && signal[k] >= signal[k + 1] {
            let denom = signal[k - 1] - 2.0 * signal[k] + signal[k + 1];
            let (off, val) = if denom.abs() > 1e-300 {
                let off = 0.5 * (signal[k - 1] - signal[k + 1]) / denom;
                let val = signal[k] - 0.25 * (signal[k - 1] - signal[k + 1]) * off;
                (off, val)
            } else {
                (0.0, signal[k])
            };
            let dt = times[1] - times[0];
            peaks.push((times[k] + off * dt, val));
        }
    }
    peaks
}

fn classify(times: &[f64], mean_dev: &[f64], sup_dist: &[f64]) -> Diagnostics {
    let final_distance = *sup_dist.last().unwrap_or(&f64::NAN);
    // Decay: last 10% of samples below the decay tolerance in sup norm.
    let tail_start = sup_dist
        .len()
        .saturating_sub(sup_dist.len() / 10)
        .min(sup_dist.len() - 1);
    let tail_max = sup_dist[tail_start..]
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if tail_max < SIM_DECAY_TOL {
        return Diagnostics {
            verdict: Verdict::Decayed,
            amplitude: 0.0,
            period: 0.0,
            final_distance_to_steady: final_distance,
        };
    }

    let maxima = refined_maxima(times, mean_dev);
    let neg: Vec<f64> = mean_dev.iter().map(|v| -v).collect();
    let minima = refined_maxima(times, &neg);
    if maxima.len() >= 6 && minima.len() >= 5 {
        // Peak-to-peak amplitudes: each maximum against the following
        // minimum.
        let mut amps = Vec::new();
        for (tmax, vmax) in &maxima {
            if let Some((_, vmin)) = minima.iter().find(|(tm, _)| tm > tmax) {
                amps.push(vmax + vmin); // vmin is the negated minimum
            }
        }
        if amps.len() >= 5 {
            let last5 = &amps[amps.len() - 5..];
            let mean_amp = last5.iter().sum::<f64>() / 5.0;
            let spread = last5.iter().cloned().fold(f64::MIN, f64::max)
                - last5.iter().cloned().fold(f64::MAX, f64::min);
            if last5.iter().all(|a| *a > SIM_MIN_AMPLITUDE)
                && spread <= SIM_PEAK_AGREEMENT * mean_amp
            {
                let late = &maxima[maxima.len() - 6..];
                let period = (late[5].0 - late[0].0) / 5.0;
                return Diagnostics {
                    verdict: Verdict::Oscillating,
                    amplitude: mean_amp,
                    period,
                    final_distance_to_steady: final_distance,
                };
            }
        }
    }
    Diagnostics {
        verdict: Verdict::Indeterminate,
        amplitude: 0.0,
        period: 0.0,
        final_distance_to_steady: final_distance,
    }
}

/// Integrate the delay PDE from the history `eta` and classify the outcome
/// against the steady state `u_star`.
pub fn run(
    params: &ModelParams,
    ops: &DiscreteOperators,
    u_star: &RealField,
    eta: &dyn Fn(f64) -> RealField,
    opts: &SimOptions,
) -> Result<SimTrace> {
    params.validate()?;
    let n = ops.n_nodes();
    let tau = params.tau;
    let mean_star: f64 =
        (0..n).map(|j| ops.grid.weights[j] * u_star[j]).sum::<f64>() / ops.grid.length;

    let (dt, mut history) = if tau > 0.0 {
        let dt = tau / opts.m_delay as f64;
        (
            dt,
            Some(HistoryBuffer::from_history(eta, tau, opts.m_delay)),
        )
    } else {
        (opts.dt_no_delay, None)
    };
    let stepper = Stepper::new(params.r, dt, ops);
    let n_steps = (opts.t_end / dt).ceil() as usize;

    let mut u = match &history {
        Some(h) => h.newest().clone(),
        None => eta(0.0),
    };
    if u.len() != n {
        return Err(Error::LengthMismatch {
            got: u.len(),
            want: n,
        });
    }

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut norms = Vec::with_capacity(n_steps + 1);
    let mut mean_dev = Vec::with_capacity(n_steps + 1);
    let mut sup_dist = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::new();
    let mut snap_queue: Vec<f64> = opts.snapshot_times.clone();
    snap_queue.sort_by(|a, b| a.partial_cmp(b).unwrap());
    snap_queue.reverse();

    let mut record = |t: f64, u: &RealField| {
        times.push(t);
        let nrm = (0..n)
            .map(|j| ops.grid.weights[j] * u[j] * u[j])
            .sum::<f64>()
            .sqrt();
        norms.push(nrm);
        let mean: f64 = (0..n).map(|j| ops.grid.weights[j] * u[j]).sum::<f64>() / ops.grid.length;
        mean_dev.push(mean - mean_star);
        sup_dist.push(
            (0..n)
                .map(|j| (u[j] - u_star[j]).abs())
                .fold(0.0f64, f64::max),
        );
    };
    record(0.0, &u);
    if let Some(pos) = snap_queue.last() {
        if *pos <= 0.0 {
            snapshots.push((0.0, u.clone()));
            snap_queue.pop();
        }
    }

    let mut reaction_prev: Option<RealField> = None;
    for k in 0..n_steps {
        let t_next = (k + 1) as f64 * dt;
        let delayed_owned;
        let delayed = match &history {
            Some(h) => {
                delayed_owned = h.oldest().clone();
                &delayed_owned
            }
            None => &u,
        };
        let (next, rnow) = stepper.step(&u, delayed, reaction_prev.as_ref(), ops)?;
        reaction_prev = Some(rnow);
        if let Some(h) = history.as_mut() {
            h.push(next.clone());
        }
        u = next;
        record(t_next, &u);
        while let Some(target) = snap_queue.last().copied() {
            if t_next + 1e-12 >= target {
                snapshots.push((t_next, u.clone()));
                snap_queue.pop();
            } else {
                break;
            }
        }
    }

    let diagnostics = classify(&times, &mean_dev, &sup_dist);
    Ok(SimTrace {
        times,
        norms,
        mean_dev,
        sup_dist,
        snapshots,
        diagnostics,
    })
}

/// The standard deterministic acceptance perturbation
/// `u_star (1 + amp cos(pi x / L))`.
pub fn cosine_perturbation(u_star: &RealField, ops: &DiscreteOperators, amp: f64) -> RealField {
    RealField::from_fn(u_star.len(), |j, _| {
        u_star[j] * (1.0 + amp * (std::f64::consts::PI * ops.grid.nodes[j] / ops.grid.length).cos())
    })
}

/// Exponential growth rate of the oscillation envelope around `u_star` at
/// delay `tau`, by a log-linear fit through the peak amplitudes of the
/// projection signal. Negative means decay towards the steady state.
pub fn envelope_growth_rate(
    params: &ModelParams,
    ops: &DiscreteOperators,
    u_star: &RealField,
    tau: f64,
    t_probe: f64,
    m_delay: usize,
) -> Result<f64> {
    let mut p = params.clone();
    p.tau = tau;
    let init = cosine_perturbation(u_star, ops, 0.01);
    let opts = SimOptions {
        t_end: t_probe,
        m_delay,
        ..Default::default()
    };
    let trace = run(&p, ops, u_star, &|_s| init.clone(), &opts)?;
    let abs_dev: Vec<f64> = trace.mean_dev.iter().map(|v| v.abs()).collect();
    let peaks = refined_maxima(&trace.times, &abs_dev);
    if peaks.len() < 6 {
        return Err(Error::HypothesisViolated(format!(
            "probe at tau = {tau} produced only {} envelope peaks",
            peaks.len()
        )));
    }
    // Fit the second half of the peak sequence (skips the transient).
    let fit = &peaks[peaks.len() / 2..];
    let n = fit.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (t, v) in fit {
        let y = v.max(1e-300).ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    Ok((n * sty - st * sy) / (n * stt - st * st))
}

/// Bisection on the envelope growth-rate sign: locates the delay where the
/// steady state hands over to oscillation. `t_probe` is the horizon per
/// probe; the bracket must straddle the onset.
pub fn bisect_onset(
    params: &ModelParams,
    ops: &DiscreteOperators,
    u_star: &RealField,
    mut tau_lo: f64,
    mut tau_hi: f64,
    rel_tol: f64,
    t_probe: f64,
    m_delay: usize,
) -> Result<f64> {
    let rate_lo = envelope_growth_rate(params, ops, u_star, tau_lo, t_probe, m_delay)?;
    let rate_hi = envelope_growth_rate(params, ops, u_star, tau_hi, t_probe, m_delay)?;
    if !(rate_lo < 0.0 && rate_hi > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "bracket [{tau_lo}, {tau_hi}] does not straddle the onset \
             (rates {rate_lo:.3e}, {rate_hi:.3e})"
        )));
    }
    while tau_hi - tau_lo > rel_tol * tau_hi {
        let mid = 0.5 * (tau_lo + tau_hi);
        if envelope_growth_rate(params, ops, u_star, mid, t_probe, m_delay)? < 0.0 {
            tau_lo = mid;
        } else {
            tau_hi = mid;
        }
    }
    Ok(0.5 * (tau_lo + tau_hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::assemble;
    use crate::model::{GrowthSpec, KernelSpec, ModelParams};
    use crate::scalarref;
    use crate::steady::continue_branch;

    fn hutchinson_params(r: f64, tau: f64, n: usize) -> ModelParams {
        ModelParams {
            alpha: 0.0,
            length: 1.0,
            r,
            tau,
            growth: GrowthSpec::Constant { m0: 1.0 },
            kernel: KernelSpec::Delta,
            n_cells: n,
        }
    }

    #[test]
    fn equilibrium_is_preserved() {
        let p = hutchinson_params(0.2, 3.0, 24);
        let ops = assemble(&p).unwrap();
        let u_star = RealField::from_element(ops.n_nodes(), 1.0);
        let opts = SimOptions {
            t_end: 100.0 * 3.0 / 256.0,
            ..Default::default()
        };
        let trace = run(&p, &ops, &u_star, &|_s| u_star.clone(), &opts).unwrap();
        assert!(trace.sup_dist.iter().all(|d| *d < 1e-8));
    }

    #[test]
    fn zero_history_stays_zero() {
        let p = hutchinson_params(0.3, 1.0, 16);
        let ops = assemble(&p).unwrap();
        let zero = RealField::zeros(ops.n_nodes());
        let opts = SimOptions {
            t_end: 5.0,
            ..Default::default()
        };
        let trace = run(&p, &ops, &zero, &|_s| zero.clone(), &opts).unwrap();
        assert!(trace.norms.iter().all(|n| *n == 0.0));
    }

    #[test]
    fn constant_history_tracks_scalar_integrator() {
        // Spatially flat dynamics: must match the scalar reference to 1e-6
        // over t in [0, 50] at r tau small enough for the step error budget.
        let r = 0.2;
        let tau = 1.0;
        let p = hutchinson_params(r, tau, 16);
        let ops = assemble(&p).unwrap();
        let u_star = RealField::from_element(ops.n_nodes(), 1.0);
        let init = RealField::from_element(ops.n_nodes(), 0.6);
        let opts = SimOptions {
            t_end: 50.0,
            ..Default::default()
        };
        let trace = run(&p, &ops, &u_star, &|_s| init.clone(), &opts).unwrap();

        let scalar = scalarref::integrate_delayed_logistic(r, tau, &|_| 0.6, 256 * 20, 50.0);
        // PDE steps: 256 per tau; scalar reference at dt/20.
        let mut worst = 0.0f64;
        for (k, t) in trace.times.iter().enumerate() {
            let idx = (t / (tau / (256.0 * 20.0))).round() as usize;
            if idx < scalar.len() {
                // The state is flat; compare the first node.
                let pde = trace.norms[k]; // |u|_Y = |u| for flat states on L=1
                worst = worst.max((pde - scalar[idx]).abs());
            }
        }
        assert!(worst < 1e-6, "trajectory gap {worst:.3e}");
    }

    #[test]
    fn temporal_self_convergence_is_second_order() {
        let r = 0.5;
        let tau = 2.0;
        let p = hutchinson_params(r, tau, 24);
        let ops = assemble(&p).unwrap();
        let u_star = RealField::from_element(ops.n_nodes(), 1.0);
        let init = cosine_perturbation(&u_star, &ops, 0.2);
        let run_at = |m: usize| {
            let opts = SimOptions {
                t_end: 20.0,
                m_delay: m,
                ..Default::default()
            };
            run(&p, &ops, &u_star, &|_s| init.clone(), &opts).unwrap()
        };
        let coarse = run_at(64);
        let fine = run_at(128);
        let finest = run_at(256);
        let dist = |a: &SimTrace, b: &SimTrace| {
            let ua = a.norms.last().unwrap();
            let ub = b.norms.last().unwrap();
            (ua - ub).abs()
        };
        let e1 = dist(&coarse, &finest);
        let e2 = dist(&fine, &finest);
        assert!(e1 / e2 >= 3.2, "order ratio {:.2}", e1 / e2);
    }

    #[test]
    fn verdicts_flip_across_the_hutchinson_threshold() {
        let r = 1.0;
        let tau0 = scalarref::hutchinson_tau0(r);
        let ops = assemble(&hutchinson_params(r, 1.0, 16)).unwrap();
        let u_star = RealField::from_element(ops.n_nodes(), 1.0);
        let init = cosine_perturbation(&u_star, &ops, 0.01);

        let p_stable = hutchinson_params(r, 0.9 * tau0, 16);
        let opts = SimOptions {
            t_end: 700.0,
            ..Default::default()
        };
        let trace = run(&p_stable, &ops, &u_star, &|_s| init.clone(), &opts).unwrap();
        assert_eq!(trace.diagnostics.verdict, Verdict::Decayed);

        let p_osc = hutchinson_params(r, 1.1 * tau0, 16);
        let opts = SimOptions {
            t_end: 400.0,
            ..Default::default()
        };
        let trace = run(&p_osc, &ops, &u_star, &|_s| init.clone(), &opts).unwrap();
        assert_eq!(trace.diagnostics.verdict, Verdict::Oscillating);
        assert!(trace.diagnostics.amplitude > 0.5);
        // Positivity along the oscillation.
        assert!(trace.norms.iter().all(|n| *n > 0.0));
    }

    #[test]
    fn onset_bisection_recovers_scalar_tau0() {
        let r = 1.0;
        let tau0 = scalarref::hutchinson_tau0(r);
        let p = hutchinson_params(r, 1.0, 16);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 1.0, 0.25).unwrap();
        let u_star = branch.state_at(1.0).unwrap();
        let found =
            bisect_onset(&p, &ops, u_star, 0.7 * tau0, 1.4 * tau0, 0.005, 260.0, 128).unwrap();
        assert!((found - tau0).abs() < 0.02 * tau0, "{found} vs {tau0}");
    }

    #[test]
    fn blowup_is_reported_not_propagated_as_nan() {
        // Giant r with a huge step forces the explicit reaction to run away.
        let p = ModelParams {
            alpha: 0.0,
            length: 1.0,
            r: 80.0,
            tau: 8.0,
            growth: GrowthSpec::Constant { m0: 1.0 },
            kernel: KernelSpec::Delta,
            n_cells: 16,
        };
        let ops = assemble(&p).unwrap();
        let u_star = RealField::from_element(ops.n_nodes(), 1.0);
        let init = cosine_perturbation(&u_star, &ops, 0.5);
        let opts = SimOptions {
            t_end: 200.0,
            m_delay: 16,
            ..Default::default()
        };
        let out = run(&p, &ops, &u_star, &|_s| init.clone(), &opts);
        assert!(matches!(out, Err(Error::BlowUp(_))));
    }

    #[test]
    fn snapshots_are_taken_at_requested_times() {
        let p = hutchinson_params(0.2, 1.0, 16);
        let ops = assemble(&p).unwrap();
        let u_star = RealField::from_element(ops.n_nodes(), 1.0);
        let opts = SimOptions {
            t_end: 10.0,
            snapshot_times: vec![0.0, 5.0, 10.0],
            ..Default::default()
        };
        let trace = run(&p, &ops, &u_star, &|_s| u_star.clone(), &opts).unwrap();
        assert_eq!(trace.snapshots.len(), 3);
        let dt = 1.0 / 256.0;
        for ((t, _), want) in trace.snapshots.iter().zip([0.0, 5.0, 10.0]) {
            assert!((t - want).abs() <= dt + 1e-12);
        }
    }
}
