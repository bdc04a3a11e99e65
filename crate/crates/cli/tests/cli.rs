//! End-to-end tests of the binary: each subcommand is exercised through a
//! real process with files on disk.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-subspace"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn binary");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_basis(path: &Path) -> (usize, usize, Vec<f64>) {
    let text = fs::read_to_string(path).unwrap();
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens.next().unwrap().parse().unwrap();
    let cols: usize = tokens.next().unwrap().parse().unwrap();
    let values: Vec<f64> = tokens.map(|t| t.parse().unwrap()).collect();
    assert_eq!(values.len(), rows * cols);
    (rows, cols, values)
}

#[test]
fn estimate_exact_recovers_the_top_coordinate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    fs::write(&input, "4 4\n5 0 0 0\n0 4 0 0\n0 0 3 0\n0 0 0 2\n").unwrap();
    let output = dir.path().join("v.txt");
    let out = run_ok(bin().args([
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--d",
        "1",
        "--radius",
        "1",
        "--solver",
        "exact",
        "--output",
        output.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("objective=5.0"), "stdout: {stdout}");

    let (rows, cols, values) = read_basis(&output);
    assert_eq!((rows, cols), (4, 1));
    assert!((values[0].abs() - 1.0).abs() < 1e-12);
    assert!(values[1..].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn estimate_iterative_handles_the_column_mode() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    fs::write(&input, "4 4\n5 0 0 0\n0 4 0 0\n0 0 3 0\n0 0 0 2\n").unwrap();
    let output = dir.path().join("v.txt");
    run_ok(bin().args([
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--d",
        "1",
        "--radius",
        "1",
        "--mode",
        "column",
        "--solver",
        "iterative",
        "--restarts",
        "4",
        "--seed",
        "7",
        "--output",
        output.to_str().unwrap(),
    ]));
    let (rows, cols, values) = read_basis(&output);
    assert_eq!((rows, cols), (4, 1));
    assert!((values[0].abs() - 1.0).abs() < 1e-9);
}

#[test]
fn estimate_rejects_a_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "estimate",
            "--input",
            dir.path().join("absent.txt").to_str().unwrap(),
            "--d",
            "1",
            "--radius",
            "1",
            "--output",
            dir.path().join("v.txt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
}

#[test]
fn packing_hypercube_writes_points_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("pack");
    run_ok(bin().args([
        "packing",
        "--kind",
        "hypercube",
        "--m",
        "16",
        "--s",
        "2",
        "--seed",
        "5",
        "--output",
        out_dir.to_str().unwrap(),
    ]));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let count = manifest["count"].as_u64().unwrap() as usize;
    assert!(count >= 16);
    assert!(manifest["min_distance"].as_f64().unwrap() >= 0.5 - 1e-12);
    assert_eq!(manifest["metric"], "euclidean");
    assert_eq!(manifest["sparsity"]["bound"], "row_l0");
    let files = manifest["point_files"].as_array().unwrap();
    assert_eq!(files.len(), count);
    let (rows, cols, _) = read_basis(&out_dir.join(files[0].as_str().unwrap()));
    assert_eq!((rows, cols), (16, 1));
}

#[test]
fn packing_gv_emits_codewords() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("code");
    run_ok(bin().args([
        "packing",
        "--kind",
        "gv",
        "--m",
        "2",
        "--s",
        "8",
        "--delta",
        "3",
        "--output",
        out_dir.to_str().unwrap(),
    ]));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let words = manifest["codewords"].as_array().unwrap();
    assert!(!words.is_empty());
    assert_eq!(words.len() as u64, manifest["count"].as_u64().unwrap());
    assert!(words.iter().all(|w| w.as_array().unwrap().len() == 8));
}

#[test]
fn packing_reports_missing_kind_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "packing",
            "--kind",
            "grassmann",
            "--m",
            "6",
            "--output",
            dir.path().join("g").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--k"), "stderr: {stderr}");
}

#[test]
fn bounds_reports_rates_and_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    fs::write(
        &params,
        r#"{"p":2981,"n":100,"d":2,"q":0.0,"r_q":6.0,
            "lambda1":2.0,"lambda_d":2.0,"lambda_d1":1.0,"sigma_sq":2.0}"#,
    )
    .unwrap();
    let out = run_ok(bin().args(["bounds", "--params", params.to_str().unwrap()]));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    let upper = report["rates"]["upper_rate_row"].as_f64().unwrap();
    assert!((upper - 1.2000016912413687).abs() < 1e-12);
    assert!(report["rates"]["rate_row_q0_weak"].is_f64());
    assert_eq!(report["conditions"].as_array().unwrap().len(), 9);
    assert!(report["all_conditions_satisfied"].is_boolean());
    assert!(report["notes"].as_array().unwrap().is_empty());
}

#[test]
fn simulate_writes_all_outputs_and_is_thread_count_free() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(
        &config,
        r#"{
          "grid": [
            {"p": 8, "n": 40, "d": 1, "q": 0.0, "r_q": 2.0, "b": 1.0},
            {"p": 8, "n": 80, "d": 1, "q": 0.0, "r_q": 2.0, "b": 1.0},
            {"p": 8, "n": 160, "d": 1, "q": 0.0, "r_q": 2.0, "b": 1.0}
          ],
          "replicates": 3,
          "master_seed": 42,
          "estimator": "exact"
        }"#,
    )
    .unwrap();
    let strip_runtime = |csv: &str| -> String {
        csv.lines()
            .map(|line| line.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let records = dir.path().join(format!("rec{threads}.csv"));
        let summary = dir.path().join(format!("sum{threads}.csv"));
        let fit = dir.path().join(format!("fit{threads}.json"));
        run_ok(bin().args([
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--output-records",
            records.to_str().unwrap(),
            "--output-summary",
            summary.to_str().unwrap(),
            "--output-fit",
            fit.to_str().unwrap(),
            "--threads",
            threads,
        ]));
        let rec_text = fs::read_to_string(&records).unwrap();
        assert_eq!(rec_text.lines().count(), 1 + 9);
        assert_eq!(fs::read_to_string(&summary).unwrap().lines().count(), 1 + 3);
        let fit: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&fit).unwrap()).unwrap();
        assert!(fit["slope"].as_f64().unwrap().is_finite());
        assert!(fit["r2"].as_f64().unwrap() > 0.0);
        csvs.push(strip_runtime(&rec_text));
    }
    assert_eq!(csvs[0], csvs[1], "records differ across thread counts");
}

#[test]
fn simulate_rejects_a_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"grid": [], "replicates": 0}"#).unwrap();
    let out = bin()
        .args(["simulate", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}
