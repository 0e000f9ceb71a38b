//! `hopfstream` command-line driver.
//!
//! Every subcommand reads one TOML config; `--set key.path=value` patches
//! individual entries. Exit codes: 0 success, 1 solver error, 2 config
//! error, 3 verification failure.

mod commands;
mod config;
mod export;

use clap::{Parser, Subcommand};

use commands::CmdError;

#[derive(Parser)]
#[command(
    name = "hopfstream",
    version,
    about = "Steady states, Hopf delays, normal forms, and simulation for a delayed nonlocal reaction-diffusion-advection logistic model"
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: String,

    /// Override a config entry by dotted path, e.g. --set model.r=0.1.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory (overrides output.dir from the config).
    #[arg(long, global = true)]
    out: Option<String>,

    /// Worker threads (default: all cores; also HOPFSTREAM_THREADS).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continue the positive steady-state branch and export it.
    Steady,
    /// Solve the Hopf characteristic system: frequencies, delay ladder, S_n.
    Hopf,
    /// Rightmost eigenvalues and unstable counts across a delay list.
    Spectrum,
    /// Center-manifold coefficients and the direction/stability verdict.
    NormalForm,
    /// Integrate the delay PDE and classify the outcome.
    Simulate,
    /// Heterogeneity sweeps over (alpha, L) grids.
    Sweep,
    /// Run the full acceptance suite and print a pass/fail table.
    Verify,
}

fn main() {
    let cli = Cli::parse();
    let workers = cli.workers.or_else(|| {
        std::env::var("HOPFSTREAM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let effective = hopfstream::par::configure_workers(workers);

    let mut config = match config::load(&cli.config, &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            std::process::exit(2);
        }
    };
    if let Some(dir) = &cli.out {
        config.output.dir = dir.clone();
    }
    let out = match export::OutDir::create(&config.output.dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("config error: {e:#}");
            std::process::exit(2);
        }
    };

    let (name, result) = match &cli.command {
        Command::Steady => ("steady", commands::steady(&config, &out)),
        Command::Hopf => ("hopf", commands::hopf(&config, &out)),
        Command::Spectrum => ("spectrum", commands::spectrum_cmd(&config, &out)),
        Command::NormalForm => ("normal-form", commands::normal_form(&config, &out)),
        Command::Simulate => ("simulate", commands::simulate_cmd(&config, &out)),
        Command::Sweep => ("sweep", commands::sweep(&config, &out)),
        Command::Verify => ("verify", commands::verify_cmd(&config, &out)),
    };

    if let Err(e) = export::meta(&out, name, &cli.config, effective) {
        eprintln!("warning: could not write run_meta.json: {e:#}");
    }

    match result {
        Ok(code) => std::process::exit(code),
        Err(CmdError::Config(e)) => {
            eprintln!("config error: {e:#}");
            std::process::exit(2);
        }
        Err(CmdError::Solver(e)) => {
            eprintln!("solver error: {e:#}");
            std::process::exit(1);
        }
    }
}
