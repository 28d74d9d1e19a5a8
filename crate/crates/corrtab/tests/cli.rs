//! End-to-end tests of the command-line interface: exit codes, formats,
//! manifests, and schema validity of every JSON output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use corrtab::datasets;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_corrtab")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn write_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("lidocaine.csv");
    fs::write(&path, datasets::LIDOCAINE_CSV).unwrap();
    path
}

fn schema() -> jsonschema::Validator {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/schema/report.schema.json");
    let raw = fs::read_to_string(path).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&raw).unwrap();
    jsonschema::validator_for(&doc).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, value: &serde_json::Value) {
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| format!("{e}"))
        .collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

#[test]
fn fit_text_table_matches_reference_layout() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let out = run(&["fit", input.to_str().unwrap(), "--seed", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7, "header + 5 trials + combined:\n{text}");
    assert!(lines[0].contains("alpha1(se)"));
    assert!(lines[6].starts_with("combined"));
}

#[test]
fn fit_json_is_schema_valid_and_reproduces_combined_pi() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let out = run(&[
        "fit",
        input.to_str().unwrap(),
        "--seed",
        "1",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&schema(), &value);
    assert_eq!(value["tables"].as_array().unwrap().len(), 5);
    let pi1 = value["combined"]["pi1_hat"].as_f64().unwrap();
    assert!((pi1 - 0.0644).abs() < 0.003, "combined pi1 = {pi1}");
}

#[test]
fn fit_multicenter_accepts_combined_null() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("multicenter.csv");
    fs::write(&input, datasets::MULTICENTER_CSV).unwrap();
    let out = run(&[
        "fit",
        input.to_str().unwrap(),
        "--seed",
        "1",
        "--format",
        "json",
        "--estimator",
        "quadrature",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["tables"].as_array().unwrap().len(), 21);
    assert_eq!(value["combined"]["reject"], serde_json::json!(false));
}

#[test]
fn fit_missing_input_exits_2() {
    let out = run(&["fit", "/nonexistent/missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn fit_invalid_row_exits_2_with_row_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "trial,y1,n1,y2,n2\n1,5,3,0,4\n").unwrap();
    let out = run(&["fit", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("row 1"), "{stderr}");
}

#[test]
fn fit_no_pool_omits_combined() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let out = run(&[
        "fit",
        input.to_str().unwrap(),
        "--format",
        "json",
        "--no-pool",
        "--estimator",
        "quadrature",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(value["combined"].is_null());
    assert_valid(&schema(), &value);
}

#[test]
fn fit_non_convergence_exits_3_but_writes_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let report = dir.path().join("report.json");
    let out = run(&[
        "fit",
        input.to_str().unwrap(),
        "--max-iters",
        "1",
        "--estimator",
        "quadrature",
        "--format",
        "json",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(value["tables"]
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t["converged"] == serde_json::json!(false)));
}

#[test]
fn fit_writes_manifest_and_replaying_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let report = dir.path().join("report.json");
    let args = [
        "fit",
        input.to_str().unwrap(),
        "--seed",
        "3",
        "--format",
        "json",
        "--output",
        report.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let first = fs::read(&report).unwrap();

    let manifest_path = dir.path().join("report.json.manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["seed"], serde_json::json!(3));
    assert_eq!(
        manifest["input_digest"].as_str().unwrap().len(),
        64,
        "sha-256 hex digest expected"
    );
    assert!(manifest["tool_version"].is_string());
    assert_eq!(manifest["config"]["fit"]["epsilon"], serde_json::json!(0.1));

    // Replay the recorded command (skipping argv[0]) and compare bytes.
    let recorded: Vec<String> = manifest["command"]
        .as_array()
        .unwrap()
        .iter()
        .skip(1)
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let out = Command::new(bin()).args(&recorded).output().unwrap();
    assert!(out.status.success());
    let second = fs::read(&report).unwrap();
    assert_eq!(first, second, "replayed manifest changed the output");
}

#[test]
fn simulate_correlation_writes_data_summary_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("corr");
    let out = run(&[
        "simulate",
        "correlation",
        "--reps",
        "300",
        "--seed",
        "7",
        "--output",
        prefix.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let data = fs::read_to_string(dir.path().join("corr.csv")).unwrap();
    assert_eq!(
        data.lines().count(),
        301,
        "header + one row per replication"
    );

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("corr.summary.json")).unwrap())
            .unwrap();
    assert_valid(&schema(), &summary);
    assert_eq!(summary["replications"], serde_json::json!(300));
    assert!(summary["quantiles"]["0.95"].is_number());
    let histogram_total: u64 = summary["histogram"]
        .as_array()
        .unwrap()
        .iter()
        .map(|bin| bin[1].as_u64().unwrap())
        .sum();
    assert_eq!(histogram_total, summary["retained"].as_u64().unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("corr.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], serde_json::json!(7));
    assert!(manifest["input_digest"].is_null());
}

#[test]
fn simulate_rejects_zero_reps() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("corr");
    let out = run(&[
        "simulate",
        "correlation",
        "--reps",
        "0",
        "--output",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_performance_summary_is_schema_valid() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("perf");
    let out = run(&[
        "simulate",
        "performance",
        "--reps",
        "4",
        "--seed",
        "7",
        "--estimator",
        "quadrature",
        "--output",
        prefix.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("perf.summary.json")).unwrap())
            .unwrap();
    assert_valid(&schema(), &summary);
    assert_eq!(summary["replications"], serde_json::json!(4));
    let data = fs::read_to_string(dir.path().join("perf.csv")).unwrap();
    assert_eq!(data.lines().count(), 5);
}

#[test]
fn datasets_list_and_export() {
    let out = run(&["datasets", "list"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "lidocaine\nmulticenter\n"
    );

    let out = run(&["datasets", "export", "lidocaine"]);
    assert!(out.status.success());
    assert_eq!(out.stdout, datasets::LIDOCAINE_CSV.as_bytes());

    let out = run(&["datasets", "export", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
