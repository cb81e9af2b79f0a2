//! End-to-end tests of the `kq` binary: subcommands, config files, exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn kq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kq"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("failed to launch kq");
    assert!(
        out.status.success(),
        "kq failed (status {:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn assert_exit_code(cmd: &mut Command, expected: i32) -> String {
    let out = cmd.output().expect("failed to launch kq");
    assert_eq!(
        out.status.code(),
        Some(expected),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small, fast run: critical chain, sudden cool, short window.
fn small_run_args(dir: &Path, prefix: &str) -> Vec<String> {
    [
        "run", "--mu", "1", "--chi", "1", "--L", "256", "--s", "1", "--Ti", "5", "--Tf", "0",
        "--schedule", "sudden", "--t-min", "1", "--t-max", "1000", "--ppd", "10", "--prefix",
        prefix,
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--out-dir".into(), dir.display().to_string()])
    .collect()
}

#[test]
fn thermal_matches_closed_form() {
    // D_th at T=5, mu=1, chi=1, L=10^4 (frozen reference value)
    let out = run_ok(kq().args(["thermal", "--T", "5"]));
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((v - 0.37698349896926478).abs() < 1e-12, "got {v}");
}

#[test]
fn run_writes_trace_and_report() {
    let dir = TempDir::new().unwrap();
    let args = small_run_args(dir.path(), "smoke");
    run_ok(kq().args(&args));

    let trace = fs::read_to_string(dir.path().join("smoke_trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "t,T,D,D_th_final,D_th_inst,excess");
    assert_eq!(lines.count(), 31); // 3 decades at 10 points per decade, inclusive

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("smoke_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["config"]["chain"]["L"], 256);
    assert!(report["trace_fit"]["exponent"].is_number());
}

#[test]
fn sweep_writes_endpoint_csv() {
    let dir = TempDir::new().unwrap();
    run_ok(kq().args([
        "sweep", "--L", "256", "--Ti", "0", "--Tf", "5", "--schedule", "linear-ramp", "--taus",
        "8,16,32", "--prefix", "sw", "--out-dir", &dir.path().display().to_string(),
    ]));
    let sweep = fs::read_to_string(dir.path().join("sw_sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next().unwrap(), "tau,t_f,D_final,D_th_final,excess");
    assert_eq!(lines.count(), 3);
    // sweep alone writes no trace
    assert!(!dir.path().join("sw_trace.csv").exists());
}

#[test]
fn fit_classifies_critical_trace_as_power_law() {
    let dir = TempDir::new().unwrap();
    let args = small_run_args(dir.path(), "f");
    run_ok(kq().args(&args));
    let trace = dir.path().join("f_trace.csv");
    let out = run_ok(kq().args([
        "fit",
        "--input",
        &trace.display().to_string(),
        "--model",
        "classify",
        "--window",
        "5,800",
    ]));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("fit output is JSON");
    assert_eq!(report["class"], "PowerLaw");
}

#[test]
fn config_file_reproduces_flag_run() {
    let dir = TempDir::new().unwrap();
    let args = small_run_args(dir.path(), "a");
    run_ok(kq().args(&args));

    // the report embeds the fully resolved config; replaying it must
    // reproduce the run byte for byte
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a_report.json")).unwrap())
            .unwrap();
    let mut cfg = report["config"].clone();
    cfg["prefix"] = "b".into();
    let cfg_path = dir.path().join("replay.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    run_ok(kq().args(["run", "--config", &cfg_path.display().to_string()]));

    let a = fs::read(dir.path().join("a_trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b_trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn validate_smoke() {
    let out = run_ok(kq().args(["validate", "--cases", "3", "--seed", "1"]));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("all 3 cases agree"), "stdout: {text}");
}

#[test]
fn invalid_parameters_exit_with_code_2() {
    let stderr = assert_exit_code(kq().args(["run", "--L", "0"]), 2);
    assert!(stderr.contains("invalid"), "stderr: {stderr}");

    let stderr = assert_exit_code(
        kq().args(["run", "--schedule", "linear-ramp", "--tau=-3"]),
        2,
    );
    assert!(stderr.contains("invalid"), "stderr: {stderr}");

    // sweep needs at least one scan axis
    assert_exit_code(kq().args(["sweep", "--L", "64"]), 2);
}

#[test]
fn missing_input_exits_with_code_2() {
    assert_exit_code(kq().args(["fit", "--input", "/nonexistent/trace.csv"]), 2);
}

#[test]
fn bad_worker_count_exits_with_code_2() {
    let stderr = assert_exit_code(
        kq().args(["thermal", "--T", "1"]).env("KQ_WORKERS", "zero"),
        2,
    );
    assert!(stderr.contains("KQ_WORKERS"), "stderr: {stderr}");
}

#[test]
fn unfittable_window_exits_with_code_3() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("tiny.csv");
    fs::write(&csv, "t,excess\n1.0,1.0\n2.0,0.5\n4.0,0.25\n").unwrap();
    // the window excludes every sample, so the fit is rejected (numerical failure)
    let stderr = assert_exit_code(
        kq().args([
            "fit",
            "--input",
            &csv.display().to_string(),
            "--window",
            "100,200",
        ]),
        3,
    );
    assert!(stderr.contains("fit"), "stderr: {stderr}");
}
