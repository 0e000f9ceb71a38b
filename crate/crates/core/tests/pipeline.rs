//! Cross-module consistency: invariants that tie two or more solver stages
//! together.

use hopfstream::charpoint::continue_char;
use hopfstream::discretize::{assemble, RealField};
use hopfstream::hetero;
use hopfstream::model::{h0, GrowthSpec, KernelSpec, ModelParams};
use hopfstream::simulate::{run, SimOptions};
use hopfstream::steady::continue_branch;

fn params(alpha: f64, growth: GrowthSpec, kernel: KernelSpec, r: f64) -> ModelParams {
    ModelParams {
        alpha,
        length: 1.0,
        r,
        tau: 0.0,
        growth,
        kernel,
        n_cells: 64,
    }
}

#[test]
fn branch_states_are_stationary_under_the_time_stepper() {
    for (alpha, kernel) in [(0.0, KernelSpec::Delta), (1.0, KernelSpec::Cumulative)] {
        let p = params(alpha, GrowthSpec::Linear, kernel, 0.3);
        let ops = assemble(&p).unwrap();
        let branch = continue_branch(&p, &ops, 0.3, 0.05).unwrap();
        for (r, state) in branch.r_values.iter().zip(&branch.states).step_by(3) {
            let mut pr = p.clone();
            pr.r = *r;
            pr.tau = 0.0;
            let opts = SimOptions {
                t_end: 1.0,
                dt_no_delay: 0.005,
                ..Default::default()
            };
            let trace = run(&pr, &ops, state, &|_s| state.clone(), &opts).unwrap();
            let drift = trace.sup_dist.last().copied().unwrap();
            assert!(drift <= 1e-8, "alpha = {alpha}, r = {r}: drift {drift:.3e}");
        }
    }
}

#[test]
fn tabulated_growth_runs_the_full_pipeline() {
    // A tabulated profile equal to the linear one must give the same
    // crossing data bit for bit (the profile enters only through its nodal
    // values).
    let n = 48;
    let nodes = hopfstream::Grid::new(1.0, n).nodes;
    let mut tab = params(1.0, GrowthSpec::Tabulated { values: nodes }, KernelSpec::Delta, 0.05);
    tab.n_cells = n;
    let mut lin = params(1.0, GrowthSpec::Linear, KernelSpec::Delta, 0.05);
    lin.n_cells = n;
    let solve = |p: &ModelParams| {
        let ops = assemble(p).unwrap();
        let branch = continue_branch(p, &ops, 0.05, 0.0125).unwrap();
        continue_char(p, &ops, &branch, 0.05).unwrap()
    };
    let a = solve(&tab);
    let b = solve(&lin);
    assert_eq!(a.h_r, b.h_r);
    assert_eq!(a.theta_r, b.theta_r);
    assert_eq!(a.tau_ladder, b.tau_ladder);
}

#[test]
fn asymptotic_sandwich_for_tau0() {
    // r tau_0 2 h0 / pi stays within [0.8, 1.2] at r = 0.05 and tightens
    // towards 1 as r decreases.
    let mut prev_gap = f64::INFINITY;
    for r in [0.05, 0.025] {
        let p = params(1.0, GrowthSpec::Linear, KernelSpec::Delta, r);
        let (tau0, _) = hetero::tau0_exact(&p).unwrap();
        let h = h0(&p).unwrap();
        let ratio = r * tau0 * 2.0 * h / std::f64::consts::PI;
        assert!((0.8..=1.2).contains(&ratio), "r = {r}: ratio {ratio}");
        let gap = (ratio - 1.0).abs();
        assert!(
            gap < prev_gap,
            "sandwich should tighten: {gap} vs {prev_gap}"
        );
        prev_gap = gap;
    }
}

#[test]
fn hopf_data_survives_the_cumulative_kernel() {
    // The full characteristic pipeline on the nonlocal kernel: residuals,
    // normalization, ladder, and simplicity all at their tolerances.
    let p = params(1.0, GrowthSpec::SinePeak, KernelSpec::Cumulative, 0.05);
    let ops = assemble(&p).unwrap();
    let branch = continue_branch(&p, &ops, 0.05, 0.0125).unwrap();
    let hopf = continue_char(&p, &ops, &branch, 0.05).unwrap();
    assert!(hopf.residual <= 1e-9);
    assert!(hopf.residual_adj <= 1e-9);
    assert!(hopf.h_r > 0.0);
    assert!(hopf.s_n.iter().all(|s| s.norm() > 1e-8));
    let c0l = hopf.c0 * hopf.c0 * ops.grid.length;
    assert!((ops.norm_y_sq(&hopf.psi_r) - c0l).abs() <= 1e-10 * c0l);
}

#[test]
fn positivity_throughout_an_oscillating_run() {
    // Positive history, default step: the state stays positive through the
    // whole oscillating trajectory.
    let p = ModelParams {
        alpha: 0.0,
        length: 1.0,
        r: 1.0,
        tau: 1.1 * std::f64::consts::FRAC_PI_2,
        growth: GrowthSpec::Constant { m0: 1.0 },
        kernel: KernelSpec::Delta,
        n_cells: 32,
    };
    let ops = assemble(&p).unwrap();
    let u_star = RealField::from_element(ops.n_nodes(), 1.0);
    let init = hopfstream::simulate::cosine_perturbation(&u_star, &ops, 0.01);
    let opts = SimOptions {
        t_end: 500.0,
        snapshot_times: vec![500.0],
        ..Default::default()
    };
    let trace = run(&p, &ops, &u_star, &|_s| init.clone(), &opts).unwrap();
    assert_eq!(
        trace.diagnostics.verdict,
        hopfstream::simulate::Verdict::Oscillating
    );
    let (_, last) = trace.snapshots.last().unwrap();
    assert!(last.iter().all(|v| *v > 0.0));
    assert!(trace.norms.iter().all(|n| n.is_finite() && *n > 0.0));
}
