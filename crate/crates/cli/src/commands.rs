//! Subcommand implementations. Diagnostics go to stderr, data to files; the
//! only stdout output is the verify table.

use anyhow::anyhow;
use num_complex::Complex64;

use hopfstream::charpoint::{self, HopfData};
use hopfstream::discretize::{assemble, DiscreteOperators, RealField};
use hopfstream::model::transform_to_original;
use hopfstream::normalform::{self, Direction, OrbitStability};
use hopfstream::simulate::{self, SimOptions};
use hopfstream::steady::{continue_branch, SteadyBranch};
use hopfstream::{hetero, spectrum, verify, ModelParams};

use crate::config::RunConfig;
use crate::export::{file_name, Csv, CsvField, OutDir};

/// Solver failures map to exit 1, configuration problems to exit 2.
pub enum CmdError {
    Config(anyhow::Error),
    Solver(anyhow::Error),
}

impl From<hopfstream::Error> for CmdError {
    fn from(e: hopfstream::Error) -> Self {
        match e {
            hopfstream::Error::Config(_) | hopfstream::Error::InvalidParams(_) => {
                CmdError::Config(anyhow!("{e}"))
            }
            other => CmdError::Solver(anyhow!("{other}")),
        }
    }
}

impl From<anyhow::Error> for CmdError {
    fn from(e: anyhow::Error) -> Self {
        CmdError::Solver(e)
    }
}

type CmdResult = Result<i32, CmdError>;

fn json_out(config: &RunConfig) -> bool {
    config.output.format == "json"
}

fn branch_to(
    params: &ModelParams,
    ops: &DiscreteOperators,
    r: f64,
) -> Result<SteadyBranch, CmdError> {
    // Land on r exactly; cap the step count so absurd r values fail fast in
    // the Newton solve instead of grinding through a long continuation.
    let steps = (r / 0.0125).ceil().clamp(1.0, 64.0);
    Ok(continue_branch(params, ops, r, r / steps)?)
}

pub fn steady(config: &RunConfig, out: &OutDir) -> CmdResult {
    let params = crate::config::require_model(config).map_err(CmdError::Config)?;
    let ops = assemble(&params)?;
    let sc = &config.command.steady;
    let branch = continue_branch(&params, &ops, sc.r_max, sc.dr)?;
    if json_out(config) {
        let rows: Vec<serde_json::Value> = branch
            .r_values
            .iter()
            .zip(&branch.states)
            .zip(&branch.residual_norms)
            .map(|((r, u), res)| {
                serde_json::json!({
                    "r": r,
                    "x": ops.grid.nodes,
                    "u": u.iter().copied().collect::<Vec<f64>>(),
                    "residual_norm": res,
                })
            })
            .collect();
        out.write_json("steady.json", &serde_json::Value::Array(rows))?;
    } else {
        let mut csv = Csv::new(&["r", "x", "u", "residual_norm"]);
        for ((r, u), res) in branch
            .r_values
            .iter()
            .zip(&branch.states)
            .zip(&branch.residual_norms)
        {
            for j in 0..ops.n_nodes() {
                csv.row(&[
                    CsvField::Float(*r),
                    CsvField::Float(ops.grid.nodes[j]),
                    CsvField::Float(u[j]),
                    CsvField::Float(*res),
                ]);
            }
        }
        out.write("steady.csv", &csv.finish())?;
    }
    eprintln!(
        "steady: {} branch points up to r = {}",
        branch.r_values.len(),
        branch.r_values.last().copied().unwrap_or(0.0)
    );
    Ok(0)
}

fn hopf_data(
    config: &RunConfig,
) -> Result<(ModelParams, DiscreteOperators, SteadyBranch, HopfData), CmdError> {
    let params = crate::config::require_model(config).map_err(CmdError::Config)?;
    if !(params.r > 0.0) {
        return Err(CmdError::Config(anyhow!(
            "model.r must be positive for this command"
        )));
    }
    let ops = assemble(&params)?;
    let branch = branch_to(&params, &ops, params.r)?;
    let hopf =
        charpoint::continue_char_with(&params, &ops, &branch, params.r, config.command.hopf.n_max)?;
    Ok((params, ops, branch, hopf))
}

pub fn hopf(config: &RunConfig, out: &OutDir) -> CmdResult {
    let (_, _, _, hopf) = hopf_data(config)?;
    let n_max = config.command.hopf.n_max;
    if json_out(config) {
        let value = serde_json::json!({
            "r": hopf.r,
            "h_r": hopf.h_r,
            "theta_r": hopf.theta_r,
            "nu_r": hopf.nu_r,
            "beta_r": hopf.beta_r,
            "tau": hopf.tau_ladder,
            "s_n": hopf.s_n.iter().map(|s| vec![s.re, s.im]).collect::<Vec<_>>(),
            "residual": hopf.residual,
        });
        out.write_json("hopf.json", &value)?;
    } else {
        let mut header: Vec<String> =
            vec!["r".into(), "h_r".into(), "theta_r".into(), "nu_r".into()];
        for k in 0..=n_max {
            header.push(format!("tau_{k}"));
        }
        header.push("re_s0".into());
        header.push("im_s0".into());
        let cols: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut csv = Csv::new(&cols);
        let mut row = vec![
            CsvField::Float(hopf.r),
            CsvField::Float(hopf.h_r),
            CsvField::Float(hopf.theta_r),
            CsvField::Float(hopf.nu_r),
        ];
        for k in 0..=n_max {
            row.push(CsvField::Float(hopf.tau_ladder[k]));
        }
        row.push(CsvField::Float(hopf.s_n[0].re));
        row.push(CsvField::Float(hopf.s_n[0].im));
        csv.row(&row);
        out.write("hopf.csv", &csv.finish())?;
    }
    eprintln!(
        "hopf: r = {}, nu_r = {:.6}, tau_0 = {:.6}",
        hopf.r, hopf.nu_r, hopf.tau_ladder[0]
    );
    Ok(0)
}

pub fn spectrum_cmd(config: &RunConfig, out: &OutDir) -> CmdResult {
    let params = crate::config::require_model(config).map_err(CmdError::Config)?;
    let ops = assemble(&params)?;
    let branch = branch_to(&params, &ops, params.r)?;
    let u_r = branch
        .state_at(params.r)
        .ok_or_else(|| CmdError::Solver(anyhow!("branch did not reach r = {}", params.r)))?;
    let sc = &config.command.spectrum;
    let reports: Vec<(f64, hopfstream::Result<spectrum::SpectrumReport>)> =
        hopfstream::par::map(sc.taus.clone(), |tau| {
            let rep = if tau == 0.0 {
                spectrum::report_from_matrix(
                    &spectrum::delay_free_matrix(params.r, u_r, &ops),
                    sc.k_eigenvalues,
                )
            } else {
                spectrum::build_generator(params.r, tau, u_r, &ops, sc.m_colloc)
                    .and_then(|gen| spectrum::rightmost_spectrum(&gen, sc.k_eigenvalues))
            };
            (tau, rep)
        });
    for (idx, (tau, rep)) in reports.into_iter().enumerate() {
        let rep = rep?;
        if json_out(config) {
            let value = serde_json::json!({
                "tau": tau,
                "n_unstable": rep.n_unstable,
                "eigenvalues": rep.eigenvalues.iter().map(|e| vec![e.re, e.im]).collect::<Vec<_>>(),
            });
            out.write_json(&file_name("spectrum", idx, "json"), &value)?;
        } else {
            let mut csv = Csv::with_comment(
                &format!("tau={tau} n_unstable={}", rep.n_unstable),
                &["re", "im"],
            );
            for e in &rep.eigenvalues {
                csv.row(&[CsvField::Float(e.re), CsvField::Float(e.im)]);
            }
            out.write(&file_name("spectrum", idx, "csv"), &csv.finish())?;
        }
        eprintln!("spectrum: tau = {tau}, n_unstable = {}", rep.n_unstable);
    }
    Ok(0)
}

pub fn normal_form(config: &RunConfig, out: &OutDir) -> CmdResult {
    let (_, ops, branch, hopf) = hopf_data(config)?;
    let n_index = config.command.normal_form.n_index;
    if n_index >= hopf.tau_ladder.len() {
        return Err(CmdError::Config(anyhow!(
            "normal_form.n_index {} exceeds the computed ladder (n_max {})",
            n_index,
            hopf.tau_ladder.len() - 1
        )));
    }
    let u_r = branch.state_at(hopf.r).expect("branch end");
    let re_mu =
        spectrum::transversality(&hopf, u_r, &ops, n_index, config.command.spectrum.m_colloc)?;
    let nf = normalform::g_coefficients(&hopf, u_r, &ops, n_index, re_mu)?;
    let dir = match nf.direction {
        Direction::Forward => "forward",
        Direction::Backward => "backward",
    };
    let stab = match nf.orbit_stability {
        OrbitStability::Stable => "stable",
        OrbitStability::Unstable => "unstable",
    };
    if json_out(config) {
        let c = |z: Complex64| vec![z.re, z.im];
        let value = serde_json::json!({
            "r": hopf.r,
            "n": n_index,
            "tau_n": hopf.tau_ladder[n_index],
            "g20": c(nf.g20),
            "g11": c(nf.g11),
            "g02": c(nf.g02),
            "g21": c(nf.g21),
            "c1": c(nf.c1),
            "b_r": c(nf.b_r),
            "re_mu_prime": re_mu,
            "mu2": nf.mu2,
            "direction": dir,
            "orbit_stability": stab,
        });
        out.write_json("normalform.json", &value)?;
    } else {
        let mut csv = Csv::new(&[
            "r",
            "n",
            "tau_n",
            "re_g20",
            "im_g20",
            "re_g11",
            "im_g11",
            "re_g02",
            "im_g02",
            "re_g21",
            "im_g21",
            "re_c1",
            "im_c1",
            "re_mu_prime",
            "mu2",
            "direction",
            "orbit_stability",
        ]);
        csv.row(&[
            CsvField::Float(hopf.r),
            CsvField::Int(n_index as i64),
            CsvField::Float(hopf.tau_ladder[n_index]),
            CsvField::Float(nf.g20.re),
            CsvField::Float(nf.g20.im),
            CsvField::Float(nf.g11.re),
            CsvField::Float(nf.g11.im),
            CsvField::Float(nf.g02.re),
            CsvField::Float(nf.g02.im),
            CsvField::Float(nf.g21.re),
            CsvField::Float(nf.g21.im),
            CsvField::Float(nf.c1.re),
            CsvField::Float(nf.c1.im),
            CsvField::Float(re_mu),
            CsvField::Float(nf.mu2),
            CsvField::Str(dir.into()),
            CsvField::Str(stab.into()),
        ]);
        out.write("normalform.csv", &csv.finish())?;
    }
    eprintln!(
        "normal-form: Re C1 = {:.6e}, mu2 = {:.6e} ({dir}, orbit {stab})",
        nf.c1.re, nf.mu2
    );
    Ok(0)
}

pub fn simulate_cmd(config: &RunConfig, out: &OutDir) -> CmdResult {
    let params = crate::config::require_model(config).map_err(CmdError::Config)?;
    let ops = assemble(&params)?;
    let branch = branch_to(&params, &ops, params.r)?;
    let u_r = branch
        .state_at(params.r)
        .ok_or_else(|| CmdError::Solver(anyhow!("branch did not reach r = {}", params.r)))?;
    let sc = &config.command.simulate;
    let init = match sc.history.as_str() {
        "cosine" => simulate::cosine_perturbation(u_r, &ops, sc.perturbation),
        "random" => seeded_perturbation(u_r, sc.perturbation, sc.seed),
        other => {
            return Err(CmdError::Config(anyhow!(
                "simulate.history must be 'cosine' or 'random', got '{other}'"
            )))
        }
    };
    let opts = SimOptions {
        t_end: sc.t_end,
        m_delay: sc.m_delay,
        snapshot_times: config.output.snapshot_times.clone(),
        ..Default::default()
    };
    let trace = simulate::run(&params, &ops, u_r, &|_s| init.clone(), &opts)?;

    if json_out(config) {
        let value = serde_json::json!({
            "t": trace.times,
            "norm": trace.norms,
            "envelope": trace.sup_dist,
        });
        out.write_json("trace.json", &value)?;
    } else {
        let mut csv = Csv::new(&["t", "norm", "envelope"]);
        for k in 0..trace.times.len() {
            csv.row(&[
                CsvField::Float(trace.times[k]),
                CsvField::Float(trace.norms[k]),
                CsvField::Float(trace.sup_dist[k]),
            ]);
        }
        out.write("trace.csv", &csv.finish())?;
    }
    for (idx, (t, state)) in trace.snapshots.iter().enumerate() {
        let original =
            transform_to_original(state, &params).map_err(|e| CmdError::Solver(anyhow!("{e}")))?;
        if json_out(config) {
            let value = serde_json::json!({
                "t": t,
                "x": ops.grid.nodes,
                "u": state.iter().copied().collect::<Vec<f64>>(),
                "u_original": original.iter().copied().collect::<Vec<f64>>(),
            });
            out.write_json(&file_name("snapshot", idx, "json"), &value)?;
        } else {
            let mut csv = Csv::with_comment(&format!("t={t}"), &["x", "u", "u_original"]);
            for j in 0..ops.n_nodes() {
                csv.row(&[
                    CsvField::Float(ops.grid.nodes[j]),
                    CsvField::Float(state[j]),
                    CsvField::Float(original[j]),
                ]);
            }
            out.write(&file_name("snapshot", idx, "csv"), &csv.finish())?;
        }
    }
    let verdict = format!("{:?}", trace.diagnostics.verdict).to_lowercase();
    let summary = serde_json::json!({
        "verdict": verdict,
        "amplitude": trace.diagnostics.amplitude,
        "period": trace.diagnostics.period,
        "final_distance_to_steady": trace.diagnostics.final_distance_to_steady,
    });
    out.write_json("simulate_summary.json", &summary)?;
    eprintln!(
        "simulate: verdict {verdict}, period {:.4}, amplitude {:.4e}",
        trace.diagnostics.period, trace.diagnostics.amplitude
    );
    Ok(0)
}

/// Deterministic seeded node-wise perturbation (SplitMix64), for
/// exploratory runs only; acceptance paths use the cosine shape.
fn seeded_perturbation(u_star: &RealField, amp: f64, seed: u64) -> RealField {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    };
    RealField::from_fn(u_star.len(), |j, _| u_star[j] * (1.0 + amp * next()))
}

pub fn sweep(config: &RunConfig, out: &OutDir) -> CmdResult {
    let params = crate::config::require_model(config).map_err(CmdError::Config)?;
    let sc = &config.command.sweep;
    match sc.mode.as_str() {
        "monotonicity" => {
            let result =
                hetero::monotonicity_scan(&params.growth, &sc.alphas, &sc.lengths, params.n_cells);
            let (table, claim_ok, claim_msg) = match result {
                Ok(t) => (
                    Some(t),
                    true,
                    "derivative signs match the profile".to_string(),
                ),
                Err(hopfstream::Error::SignViolation { count, cells }) => {
                    (None, false, format!("{count} offending cells: {cells}"))
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(table) = &table {
                write_sweep_table(config, out, table)?;
            }
            let summary = serde_json::json!({
                "claims": [{
                    "name": "h0 derivative signs",
                    "passed": claim_ok,
                    "detail": claim_msg,
                }],
            });
            out.write_json("summary.json", &summary)?;
            if !claim_ok {
                return Err(CmdError::Solver(anyhow!("sign assertion failed")));
            }
            Ok(0)
        }
        "tau0" => {
            let table = hetero::tau0_sweep(
                &params.growth,
                &params.kernel,
                &sc.alphas,
                &sc.lengths,
                params.r,
                params.n_cells,
            );
            write_sweep_table(config, out, &table)?;
            let failed = table.cells.iter().filter(|c| c.error.is_some()).count();
            let summary = serde_json::json!({
                "claims": [{
                    "name": "tau0 computed on every cell",
                    "passed": failed == 0,
                    "detail": format!("{failed} failed cells of {}", table.cells.len()),
                }],
            });
            out.write_json("summary.json", &summary)?;
            Ok(0)
        }
        other => Err(CmdError::Config(anyhow!(
            "sweep.mode must be 'monotonicity' or 'tau0', got '{other}'"
        ))),
    }
}

fn write_sweep_table(
    config: &RunConfig,
    out: &OutDir,
    table: &hetero::SweepTable,
) -> Result<(), CmdError> {
    if json_out(config) {
        let rows: Vec<serde_json::Value> = table
            .cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "alpha": c.alpha,
                    "L": c.length,
                    "r": c.r,
                    "h0": c.h0,
                    "dh0_dalpha": c.dh0_dalpha,
                    "dh0_dlength": c.dh0_dlength,
                    "theta_r": c.theta_r,
                    "h_r": c.h_r,
                    "tau0": c.tau0,
                    "error": c.error,
                })
            })
            .collect();
        out.write_json("sweep.json", &serde_json::Value::Array(rows))?;
    } else {
        let mut csv = Csv::new(&[
            "alpha",
            "L",
            "r",
            "h0",
            "dh0_dalpha",
            "dh0_dlength",
            "theta_r",
            "h_r",
            "tau0",
            "error",
        ]);
        let opt = |v: Option<f64>| match v {
            Some(x) => CsvField::Float(x),
            None => CsvField::Str(String::new()),
        };
        for c in &table.cells {
            csv.row(&[
                CsvField::Float(c.alpha),
                CsvField::Float(c.length),
                CsvField::Float(c.r),
                CsvField::Float(c.h0),
                CsvField::Float(c.dh0_dalpha),
                CsvField::Float(c.dh0_dlength),
                opt(c.theta_r),
                opt(c.h_r),
                opt(c.tau0),
                CsvField::Str(c.error.clone().unwrap_or_default()),
            ]);
        }
        out.write("sweep.csv", &csv.finish())?;
    }
    Ok(())
}

pub fn verify_cmd(_config: &RunConfig, out: &OutDir) -> CmdResult {
    let reports = verify::run_all();
    let mut all_pass = true;
    for report in &reports {
        println!("{}", report.summary_line());
        for line in &report.details {
            println!("    {line}");
        }
        all_pass &= report.passed;
    }
    let summary = serde_json::json!({
        "passed": all_pass,
        "criteria": reports
            .iter()
            .map(|r| {
                serde_json::json!({
                    "id": r.id,
                    "name": r.name,
                    "passed": r.passed,
                    "seconds": r.seconds,
                    "details": r.details,
                })
            })
            .collect::<Vec<_>>(),
    });
    out.write_json("summary.json", &summary)?;
    Ok(if all_pass { 0 } else { 3 })
}
