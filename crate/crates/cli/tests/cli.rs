//! End-to-end tests of the `microdrift` binary: CSV schemas, exit codes,
//! config validation, and record determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_microdrift"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn psi_csv_schema_and_golden_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("psi.csv");
    let result = run(&[
        "psi",
        "--omega-tilde",
        "1,1.6180339887498949",
        "--qmax",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("Q,min_divisor,psi"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    let psi1: f64 = first[2].parse().unwrap();
    assert!((psi1 - 1.618033988749895).abs() < 1e-9, "Psi(1) = {psi1}");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn delta_and_mu_values() {
    let out = run(&["delta", "--omega-tilde", "1", "--x", "17.25", "--qmax", "64"]);
    assert!(out.status.success());
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 17.25).abs() < 1e-12, "periodic Delta(x) = x, got {v}");

    let out = run(&["mu", "--omega-tilde", "1", "--eps", "1e-4", "--kappa", "2.0"]);
    assert!(out.status.success());
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 0.005).abs() < 1e-12, "mu = sqrt(eps)/kappa, got {v}");
}

#[test]
fn hidden_resonance_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("psi.csv");
    let result = run(&[
        "psi",
        "--omega-tilde",
        "1,-0.5",
        "--qmax",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3), "{}", stderr(&result));
    assert!(stderr(&result).contains("hidden resonance"));
}

#[test]
fn average_reports_pendulum_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("avg.json");
    let result = run(&[
        "average",
        "--system",
        repo_config("pendulum.json").to_str().unwrap(),
        "--resonance",
        repo_config("resonance_01.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let lambda = value["lambda"].as_f64().unwrap();
    let delta = value["delta"].as_f64().unwrap();
    assert!((lambda - 0.025330295910584444).abs() < 1e-12);
    assert!((delta - 0.16286750396764).abs() < 1e-10);
    assert_eq!(value["theta_star"][0].as_f64().unwrap(), 0.25);
}

#[test]
fn drift_record_is_deterministic_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for sub in ["a", "b"] {
        let rec_dir = dir.path().join(sub);
        let out = dir.path().join(format!("report_{sub}.json"));
        let result = run(&[
            "drift",
            "--system",
            repo_config("pendulum.json").to_str().unwrap(),
            "--resonance",
            repo_config("resonance_01.json").to_str().unwrap(),
            "--eps",
            "1e-3",
            "--out",
            out.to_str().unwrap(),
            "--out-dir",
            rec_dir.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "{}", stderr(&result));
        let mut value: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(rec_dir.join("run.json")).unwrap(),
        )
        .unwrap();
        value.as_object_mut().unwrap().remove("timestamp");
        records.push(serde_json::to_string(&value).unwrap());
    }
    assert_eq!(records[0], records[1], "identical configs must reproduce identical records");
}

#[test]
fn persisted_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec");
    let first = dir.path().join("report1.json");
    let result = run(&[
        "drift",
        "--system",
        repo_config("two_mode.json").to_str().unwrap(),
        "--resonance",
        repo_config("resonance_01.json").to_str().unwrap(),
        "--eps",
        "1e-3",
        "--phase-sweep",
        "2",
        "--transverse",
        "0.125",
        "--out",
        first.to_str().unwrap(),
        "--out-dir",
        rec.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));

    // extract the config snapshot and re-run from it alone
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(rec.join("run.json")).unwrap()).unwrap();
    let cfg = dir.path().join("replay.json");
    std::fs::write(&cfg, serde_json::to_string_pretty(&record["config"]).unwrap()).unwrap();
    let second = dir.path().join("report2.json");
    let result = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "drift",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    assert_eq!(
        std::fs::read_to_string(&first).unwrap(),
        std::fs::read_to_string(&second).unwrap(),
        "replayed run must reproduce the report byte for byte"
    );
}

#[test]
fn sweep_csv_schema_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let rec = dir.path().join("rec");
    let result = run(&[
        "sweep",
        "--system",
        repo_config("pendulum.json").to_str().unwrap(),
        "--resonance",
        repo_config("resonance_01.json").to_str().unwrap(),
        "--eps-decades",
        "1e-2:1e-4:5",
        "--out",
        csv.to_str().unwrap(),
        "--out-dir",
        rec.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text
        .starts_with("eps,mu,tau,drift_total,drift_along,drift_transverse,threshold,pass\n"));
    assert_eq!(text.lines().count(), 6);
    assert!(text.contains("true"));

    let plots = dir.path().join("plots");
    let result = run(&[
        "plot",
        "--record",
        rec.to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    let svg = std::fs::read_to_string(plots.join("sweep_plot.svg")).unwrap();
    assert!(svg.matches("<circle").count() >= 5, "sweep plot needs the data points");
    assert!(svg.matches("<polyline").count() >= 2, "fit line plus reference guide");
}

#[test]
fn plot_on_empty_record_is_a_clean_noop() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"run_id": "x", "version": "0", "command": "none", "config": {}, "reports": {}, "timestamp": {}}"#,
    )
    .unwrap();
    let result = run(&["plot", "--record", dir.path().to_str().unwrap()]);
    assert!(result.status.success());
    assert!(stdout(&result).contains("nothing to do"));
}

#[test]
fn config_defaults_and_validation() {
    let dir = tempfile::tempdir().unwrap();

    // minimal config: experiment runs with kappa = 1, mu0 = 0.1 defaults
    let cfg = dir.path().join("experiment.json");
    std::fs::copy(repo_config("pendulum_experiment.json"), &cfg).unwrap();
    let out = dir.path().join("report.json");
    let result = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "drift",
        "--eps",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));

    // n = 1 rejected
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"system": {"n": 1, "domain_radius": 1.0, "epsilon": 0.0, "h": [], "f": []}}"#,
    )
    .unwrap();
    let result = run(&[
        "--config",
        bad.to_str().unwrap(),
        "drift",
        "--eps",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr(&result).contains("at least 2"), "{}", stderr(&result));

    // non-integer mode index: schema error naming the location
    let bad2 = dir.path().join("bad2.json");
    std::fs::write(
        &bad2,
        r#"{"system": {"n": 2, "domain_radius": 1.0, "epsilon": 0.0, "h": [],
            "f": [{"k": [0.5, 0], "re": 1.0}]}}"#,
    )
    .unwrap();
    let result = run(&[
        "--config",
        bad2.to_str().unwrap(),
        "drift",
        "--eps",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr(&result).contains("line"), "{}", stderr(&result));

    // unknown keys rejected
    let bad3 = dir.path().join("bad3.json");
    std::fs::write(&bad3, r#"{"not_a_field": 1}"#).unwrap();
    let result = run(&[
        "--config",
        bad3.to_str().unwrap(),
        "drift",
        "--eps",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr(&result).contains("not_a_field"), "{}", stderr(&result));
}

#[test]
fn unwritable_output_is_an_io_failure_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "file, not a directory").unwrap();
    let target = blocker.join("psi.csv");
    let result = run(&[
        "psi",
        "--omega-tilde",
        "1",
        "--qmax",
        "4",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(4), "{}", stderr(&result));
    // the temp-then-rename discipline leaves nothing behind
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn integrate_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let result = run(&[
        "integrate",
        "--system",
        repo_config("pendulum.json").to_str().unwrap(),
        "--theta0",
        "0.25,0",
        "--i0",
        "0,1",
        "--T",
        "2.0",
        "--step",
        "1e-2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,theta_1,theta_2,I_1,I_2,energy\n"));
}
