//! End-to-end checks of the `mpest` binary: output layout, config echo,
//! determinism, and the exit-code contract (0 ok, 2 config, 3 numerical).

use std::path::PathBuf;
use std::process::{Command, Output};

use mpest_core::experiments::{BankChoice, ExperimentConfig, Scenario};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpest"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mpest-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("failed to spawn mpest");
    assert!(
        out.status.success(),
        "mpest {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("failed to spawn mpest");
    let code = out.status.code().expect("process killed by signal");
    assert_ne!(code, 0, "mpest {args:?} unexpectedly succeeded");
    (code, String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn run_writes_tables_and_echoes_the_config() {
    let dir = scratch("tables");
    run_ok(&[
        "run",
        "single-run",
        "--out",
        dir.to_str().unwrap(),
        "--trials",
        "3",
        "--seed",
        "99",
    ]);

    let csv = std::fs::read_to_string(dir.join("single_run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "path,true_delay,estimated_delay,squared_error"
    );
    assert_eq!(lines.count(), 2, "one row per path");

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config"]["scenario"], "single-run");
    assert_eq!(meta["config"]["trials"], 3);
    assert_eq!(meta["config"]["seed"], 99);

    // the echoed config must be directly reusable as a config file
    let echo = dir.join("echo.json");
    std::fs::write(&echo, serde_json::to_string(&meta["config"]).unwrap()).unwrap();
    run_ok(&[
        "run",
        "single-run",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        dir.join("again").to_str().unwrap(),
    ]);

    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn reruns_are_byte_identical() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    for dir in [&a, &b] {
        run_ok(&[
            "run",
            "mse-vs-snr",
            "--trials",
            "3",
            "--out",
            dir.to_str().unwrap(),
        ]);
    }
    let x = std::fs::read(a.join("mse_vs_snr.csv")).unwrap();
    let y = std::fs::read(b.join("mse_vs_snr.csv")).unwrap();
    assert_eq!(x, y, "same seed must reproduce the sweep bit for bit");
    for dir in [&a, &b] {
        let _ = std::fs::remove_dir_all(dir);
    }
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let (code, stderr) = run_err(&["run", "no-such-thing"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown scenario"), "stderr: {stderr}");
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = scratch("badfield");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"nonsense": true}"#).unwrap();
    let (code, _) = run_err(&["run", "single-run", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_scenario_must_match_the_subcommand() {
    let dir = scratch("mismatch");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("snr.json");
    let cfg = ExperimentConfig::preset(Scenario::MseVsSnr);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let (code, stderr) = run_err(&["run", "single-run", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {stderr}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn singular_bank_is_a_numerical_failure() {
    let dir = scratch("singular");
    std::fs::create_dir_all(&dir).unwrap();
    let mut cfg = ExperimentConfig::preset(Scenario::SingleRun);
    // duplicated channel shifts make the mixing matrix singular
    cfg.bank = BankChoice::DelayedLowpass {
        shifts: vec![0.0, 0.0, 0.3, 0.7],
    };
    cfg.gamma = -2;
    let path = dir.join("singular.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let (code, stderr) = run_err(&[
        "run",
        "single-run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "stderr: {stderr}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn estimate_emits_a_json_summary() {
    let out = run_ok(&["estimate", "--seed", "7"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("stdout must be JSON");
    assert!(v["delay_mse"].as_f64().unwrap().is_finite());
    assert_eq!(v["true_delays"].as_array().unwrap().len(), 2);
    assert_eq!(v["estimated_delays"].as_array().unwrap().len(), 2);
}

#[test]
fn selftest_passes() {
    let out = run_ok(&["selftest"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("selftest passed"), "stdout: {stdout}");
}
