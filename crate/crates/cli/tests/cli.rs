//! End-to-end tests of the command-line contract: exit codes, file
//! artifacts, overrides, and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hopfstream"))
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const BASE: &str = r#"
[model]
alpha = 0.0
L = 1.0
r = 0.1
tau = 0.0
n_cells = 32

[model.growth]
variant = "constant"
m0 = 1.0

[model.kernel]
variant = "delta"

[command.steady]
r_max = 0.1
dr = 0.025

[output]
dir = "OUTDIR"
format = "csv"
"#;

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hopfstream")
}

#[test]
fn missing_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = BASE.replace("L = 1.0\n", "");
    let config = write_config(
        tmp.path(),
        &body.replace("OUTDIR", tmp.path().to_str().unwrap()),
    );
    let out = run(&["steady", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("L"),
        "message should name the missing key: {stderr}"
    );
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{BASE}\n[command.steady2]\nfoo = 1\n");
    let config = write_config(
        tmp.path(),
        &body.replace("OUTDIR", tmp.path().to_str().unwrap()),
    );
    let out = run(&["steady", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_maps_to_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        &BASE.replace("OUTDIR", outdir.to_str().unwrap()),
    );
    // Delay PDE far past every stability margin with a coarse delay grid:
    // the explicit reaction runs away and the run must surface the blow-up
    // as a solver error.
    let out = run(&[
        "simulate",
        "--config",
        &config,
        "--set",
        "model.r=80.0",
        "--set",
        "model.tau=8.0",
        "--set",
        "command.simulate.m_delay=16",
        "--set",
        "command.simulate.perturbation=0.5",
        "--set",
        "command.simulate.t_end=400.0",
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("solver error"), "{stderr}");
}

#[test]
fn steady_and_hopf_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        &BASE.replace("OUTDIR", outdir.to_str().unwrap()),
    );
    let out = run(&["steady", "--config", &config]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(outdir.join("steady.csv")).unwrap();
    assert!(csv.starts_with("r,x,u,residual_norm\n"));
    assert!(outdir.join("run_meta.json").exists());

    let out = run(&["hopf", "--config", &config]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(outdir.join("hopf.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "r,h_r,theta_r,nu_r,tau_0,tau_1,tau_2,tau_3,re_s0,im_s0"
    );
    // Homogeneous logistic instance: r tau_0 = pi/2 to solver accuracy.
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((row[0] * row[4] - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
}

#[test]
fn json_format_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        &BASE.replace("OUTDIR", outdir.to_str().unwrap()),
    );
    let out = run(&[
        "hopf",
        "--config",
        &config,
        "--set",
        "output.format=\"json\"",
        "--set",
        "command.hopf.n_max=1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(outdir.join("hopf.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["tau"].as_array().unwrap().len(), 2);
}

#[test]
fn spectrum_counts_and_csv_header() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");
    let extra = format!(
        "{BASE}\n[command.spectrum]\ntaus = [0.0, 18.0]\nm_colloc = 12\nk_eigenvalues = 6\n"
    );
    let config = write_config(
        tmp.path(),
        &extra.replace("OUTDIR", outdir.to_str().unwrap()),
    );
    let out = run(&["spectrum", "--config", &config]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read_to_string(outdir.join("spectrum_000.csv")).unwrap();
    assert!(
        first.starts_with("# tau=0 n_unstable=0\nre,im\n"),
        "{first}"
    );
    // tau = 18 is past the homogeneous threshold pi/(2 r) ~ 15.7.
    let second = std::fs::read_to_string(outdir.join("spectrum_001.csv")).unwrap();
    assert!(second.starts_with("# tau=18 n_unstable=2\n"), "{second}");
}

#[test]
fn identical_config_gives_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let config = write_config(tmp.path(), &BASE.replace("OUTDIR", "placeholder"));
    for (dir, tag) in [(&out_a, "a"), (&out_b, "b")] {
        let out = run(&[
            "spectrum",
            "--config",
            &config,
            "--set",
            "command.spectrum.taus=[12.0]",
            "--set",
            "command.spectrum.m_colloc=10",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{tag}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(out_a.join("spectrum_000.csv")).unwrap();
    let b = std::fs::read(out_b.join("spectrum_000.csv")).unwrap();
    assert_eq!(a, b, "spectrum CSV must be byte-identical across runs");
}

#[test]
fn simulate_emits_trace_snapshots_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");
    let body =
        format!("{BASE}\n[command.simulate]\nt_end = 40.0\nm_delay = 64\nperturbation = 0.01\n")
            .replace(
                "format = \"csv\"\n",
                "format = \"csv\"\nsnapshot_times = [0.0, 40.0]\n",
            );
    let config = write_config(
        tmp.path(),
        &body.replace("OUTDIR", outdir.to_str().unwrap()),
    );
    let out = run(&["simulate", "--config", &config, "--set", "model.tau=2.0"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(outdir.join("trace.csv").exists());
    assert!(outdir.join("snapshot_000.csv").exists());
    assert!(outdir.join("snapshot_001.csv").exists());
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(outdir.join("simulate_summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["final_distance_to_steady"].as_f64().unwrap() < 1e-3);
}

#[test]
fn out_of_range_ladder_index_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");
    let config = write_config(tmp.path(), &BASE.replace("OUTDIR", outdir.to_str().unwrap()));
    let out = run(&[
        "normal-form",
        "--config",
        &config,
        "--set",
        "command.normal_form.n_index=9",
        "--set",
        "command.hopf.n_max=2",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seeded_random_history_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let config = write_config(tmp.path(), &BASE.replace("OUTDIR", "placeholder"));
    for dir in [&out_a, &out_b] {
        let out = run(&[
            "simulate",
            "--config",
            &config,
            "--set",
            "model.tau=1.0",
            "--set",
            "command.simulate.t_end=5.0",
            "--set",
            "command.simulate.m_delay=64",
            "--set",
            "command.simulate.history=\"random\"",
            "--set",
            "command.simulate.seed=42",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(out_a.join("trace.csv")).unwrap();
    let b = std::fs::read(out_b.join("trace.csv")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the trace");
}
