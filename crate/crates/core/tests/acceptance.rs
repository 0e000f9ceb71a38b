//! Acceptance suite: one test per criterion, each printing its pass/fail
//! line and the per-assertion details. Run with
//! `cargo test --test acceptance -- --nocapture` to see the table.

use hopfstream::verify;

fn run(report: verify::CheckReport) {
    println!("{}", report.summary_line());
    for line in &report.details {
        println!("    {line}");
    }
    assert!(report.passed, "{} failed; details above", report.name);
}

#[test]
fn criterion_1_operator_correctness() {
    run(verify::criterion1());
}

#[test]
fn criterion_2_small_r_limits() {
    run(verify::criterion2());
}

#[test]
fn criterion_3_spectrum_counting() {
    run(verify::criterion3());
}

#[test]
fn criterion_4_cross_oracle_tau0() {
    run(verify::criterion4());
}

#[test]
fn criterion_5_hopf_direction_and_orbit_stability() {
    run(verify::criterion5());
}

#[test]
fn criterion_6_scalar_oracle_equivalence() {
    run(verify::criterion6());
}

#[test]
fn criterion_7_heterogeneity_orderings() {
    run(verify::criterion7());
}

#[test]
fn criterion_8_water_column_flip() {
    run(verify::criterion8());
}
