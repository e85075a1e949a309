//! End-to-end tests of the command-line interface: exit codes, file
//! formats, and reproducibility.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moment-spectra"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn run_json(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON report")
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("moment-spectra-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn synth_is_deterministic_and_unit_norm_for_sphere() {
    let out1 = tmp_path("sphere1.csv");
    let out2 = tmp_path("sphere2.csv");
    for out in [&out1, &out2] {
        let st = run(&[
            "synth",
            "--model",
            "sphere",
            "--d",
            "5",
            "--n",
            "100",
            "--seed",
            "1",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert!(st.status.success());
    }
    let a = fs::read(&out1).unwrap();
    let b = fs::read(&out2).unwrap();
    assert_eq!(a, b, "same seed must give identical files");

    let text = String::from_utf8(a).unwrap();
    let mut rows = 0;
    for line in text.lines() {
        if line.starts_with('#') {
            continue;
        }
        let coords: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(coords.len(), 5);
        let norm: f64 = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 100);
    fs::remove_file(&out1).ok();
    fs::remove_file(&out2).ok();
}

#[test]
fn synth_discrete_axes_enumerates_exactly() {
    let out = tmp_path("axes.csv");
    let st = run(&[
        "synth",
        "--model",
        "discrete-axes",
        "--d",
        "3",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    let distinct: std::collections::HashSet<&str> = rows.iter().copied().collect();
    assert_eq!(distinct.len(), 6);
    fs::remove_file(&out).ok();
}

#[test]
fn analyze_analytic_cube_fixture() {
    let report = run_json(&["analyze", "--model", "iid-cube", "--d", "10", "--analytic"]);
    let l1 = report["gap"]["lambda1"].as_f64().unwrap();
    let l2 = report["gap"]["lambda2"].as_f64().unwrap();
    assert!((l1 - 10.8).abs() < 1e-12, "λ₁ = {l1}");
    assert!((l2 - 2.0).abs() < 1e-12, "λ₂ = {l2}");
    assert_eq!(report["schema"], "moment-spectra/1");
    assert_eq!(report["gap"]["beta_is_heuristic"], true);
}

#[test]
fn analyze_sphere_gap_within_budget() {
    let report = run_json(&[
        "analyze", "--model", "sphere", "--d", "30", "--n", "20000", "--seed", "7",
    ]);
    let gamma = report["gap"]["gamma"].as_f64().unwrap();
    assert!(gamma <= 0.1, "Γ = {gamma}");
}

#[test]
fn analyze_two_row_file_sets_degenerate_flags() {
    let csv = tmp_path("tworow.csv");
    fs::write(&csv, "1.0,2.0\n1.0,2.0\n").unwrap();
    let report = run_json(&["analyze", "--input", csv.to_str().unwrap()]);
    assert_eq!(report["flags"]["near_point_mass"], true);
    fs::remove_file(&csv).ok();
}

#[test]
fn analyze_reports_are_bit_identical_across_runs() {
    let args = [
        "analyze", "--model", "iid-cube", "--d", "4", "--n", "500", "--seed", "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "reports must be byte-identical");
}

#[test]
fn synth_analyze_round_trip_matches_in_memory_pipeline() {
    let csv = tmp_path("roundtrip.csv");
    let st = run(&[
        "synth",
        "--model",
        "sphere",
        "--d",
        "5",
        "--n",
        "400",
        "--seed",
        "3",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(st.status.success());

    // The seed also drives the β direction search, so both paths get it.
    let from_file = run_json(&["analyze", "--input", csv.to_str().unwrap(), "--seed", "3"]);
    let from_model = run_json(&[
        "analyze", "--model", "sphere", "--d", "5", "--n", "400", "--seed", "3",
    ]);
    // Identical numeric payloads; only the config echo differs.
    assert_eq!(from_file["spectrum"], from_model["spectrum"]);
    assert_eq!(from_file["gap"], from_model["gap"]);
    assert_eq!(from_file["beta"], from_model["beta"]);
    fs::remove_file(&csv).ok();
}

#[test]
fn decompose_projection_mixture_and_assignment_file() {
    let assignment = tmp_path("assign.csv");
    let report = run_json(&[
        "decompose",
        "--model",
        "projection-mixture",
        "--d",
        "8",
        "--n",
        "20000",
        "--seed",
        "5",
        "--assignment",
        assignment.to_str().unwrap(),
    ]);
    let normalized = report["decomposition"]["achieved_normalized"]
        .as_f64()
        .unwrap();
    assert!(normalized >= 0.8, "normalized achieved {normalized}");
    assert!(report["decomposition"]["guarantee_is_heuristic"]
        .as_bool()
        .unwrap());

    let text = fs::read_to_string(&assignment).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 20000);
    // Columns: 8 coordinates + w1 + w2; the halves each sum to 1.
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for row in &rows {
        let fields: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields.len(), 10);
        s1 += fields[8];
        s2 += fields[9];
    }
    assert!((s1 - 1.0).abs() < 1e-9, "Σw1 = {s1}");
    assert!((s2 - 1.0).abs() < 1e-9, "Σw2 = {s2}");
    fs::remove_file(&assignment).ok();
}

#[test]
fn decompose_point_mass_achieves_nothing() {
    let csv = tmp_path("pointmass.csv");
    fs::write(&csv, "0.5,0.25\n0.5,0.25\n0.5,0.25\n0.5,0.25\n").unwrap();
    let report = run_json(&["decompose", "--input", csv.to_str().unwrap()]);
    let achieved = report["decomposition"]["achieved"].as_f64().unwrap();
    assert!(achieved.abs() < 1e-12);
    fs::remove_file(&csv).ok();
}

#[test]
fn decompose_small_input_cross_checks_oracle() {
    let csv = tmp_path("small10.csv");
    let mut body = String::new();
    for k in 0..10 {
        let x = (k as f64 * 0.7).sin();
        let y = (k as f64 * 1.3).cos();
        body.push_str(&format!("{x},{y}\n"));
    }
    fs::write(&csv, body).unwrap();
    let report = run_json(&["decompose", "--input", csv.to_str().unwrap()]);
    let achieved = report["decomposition"]["achieved"].as_f64().unwrap();
    let oracle = report["decomposition"]["oracle_s_exact"].as_f64().unwrap();
    assert!(achieved <= oracle + 1e-9, "{achieved} vs oracle {oracle}");
    fs::remove_file(&csv).ok();
}

#[test]
fn oracle_axes_fixture_and_determinism() {
    let report = run_json(&["oracle", "--model", "discrete-axes", "--d", "2", "--p", "4"]);
    let beta = report["oracle"]["beta_exact"].as_f64().unwrap();
    assert!((beta - 2.0f64.powf(0.25)).abs() < 1e-6, "β = {beta}");
    let s = report["oracle"]["s_exact"].as_f64().unwrap();
    assert!((s - 0.5 * 2.0f64.sqrt()).abs() < 1e-12, "s = {s}");

    let csv = tmp_path("collinear.csv");
    fs::write(&csv, "1.0\n2.0\n").unwrap();
    let report = run_json(&["oracle", "--input", csv.to_str().unwrap(), "--alpha", "0.5"]);
    let s = report["oracle"]["s_exact"].as_f64().unwrap();
    assert!((s - 1.5).abs() < 1e-12);
    let sup = report["oracle"]["alpha_supremum"].as_f64().unwrap();
    assert!((sup - 1.5).abs() < 1e-12);
    fs::remove_file(&csv).ok();

    // Determinism across runs.
    let args = [
        "oracle", "--model", "sphere", "--d", "3", "--n", "12", "--seed", "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes_follow_the_contract() {
    // Usage: conflicting input specifications.
    let out = run(&[
        "analyze", "--input", "x.csv", "--model", "sphere", "--d", "3",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Usage: missing input entirely.
    let out = run(&["analyze"]);
    assert_eq!(out.status.code(), Some(1));

    // Data: malformed CSV cell, line number reported.
    let csv = tmp_path("bad.csv");
    fs::write(&csv, "1.0,2.0\n3.0,4.0\n5.0,oops\n").unwrap();
    let out = run(&["analyze", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
    fs::remove_file(&csv).ok();

    // Data: ragged row.
    let csv = tmp_path("ragged.csv");
    fs::write(&csv, "1.0,2.0\n3.0\n").unwrap();
    let out = run(&["analyze", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_file(&csv).ok();

    // Data: oracle size limit.
    let csv = tmp_path("toolarge.csv");
    let body: String = (0..16).map(|k| format!("{k}.0\n")).collect();
    fs::write(&csv, body).unwrap();
    let out = run(&["oracle", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_file(&csv).ok();

    // Missing file is a data error.
    let out = run(&["analyze", "--input", "/nonexistent/nope.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_env_variable_is_validated() {
    let out = bin()
        .args(["analyze", "--model", "sphere", "--d", "3", "--n", "50"])
        .env("MOMENT_SPECTRA_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());

    let out = bin()
        .args(["analyze", "--model", "sphere", "--d", "3", "--n", "50"])
        .env("MOMENT_SPECTRA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spectrum_subcommand_full_list() {
    let report = run_json(&[
        "spectrum",
        "--model",
        "gaussian",
        "--d",
        "4",
        "--analytic",
        "--full-spectrum",
    ]);
    let full = report["spectrum"]["full"].as_array().unwrap();
    assert_eq!(full.len(), 10);
    assert!((full[0].as_f64().unwrap() - 6.0).abs() < 1e-10);
    for v in &full[1..] {
        assert!((v.as_f64().unwrap() - 2.0).abs() < 1e-10);
    }
    assert_eq!(report["spectrum"]["degenerate_leading_pair"], false);
}

#[test]
fn timings_are_opt_in() {
    let without = run_json(&["analyze", "--model", "sphere", "--d", "3", "--n", "60"]);
    assert!(without.get("timings_ms").is_none());
    let with = run_json(&[
        "analyze",
        "--model",
        "sphere",
        "--d",
        "3",
        "--n",
        "60",
        "--timings",
    ]);
    assert!(with["timings_ms"]["total"].as_f64().unwrap() >= 0.0);
}
