//! Exit codes and file outputs of the `starflow` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_starflow"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    text.split_whitespace()
        .find_map(|w| w.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key}= in {text}"))
        .parse()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn sphere_example_converges_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = config("sphere_expand.cfg");
    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let summary: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "Converged");
    for key in ["barriers", "sign", "evolution_identity", "uniqueness"] {
        assert!(summary["checks"][key]["outcome"].is_string(), "{key}");
    }
    assert_eq!(summary["checks"]["sign"]["outcome"], "pass");
    assert_eq!(summary["checks"]["evolution_identity"]["outcome"], "pass");

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f == "history.csv"));
    for f in files {
        assert!(out_dir.join(f.as_str().unwrap()).exists(), "{f}");
    }
    assert_eq!(manifest["config_hash"], summary["config_hash"]);
    let history = fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert!(history.starts_with("starflow-history-v1\n"));

    let gamma = out_dir.join("final_gamma.csv");
    let curv = tmp.path().join("curv.csv");
    let out = run(&["curvature", gamma.to_str().unwrap(), cfg.to_str().unwrap(), "--out", curv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let residual = field(&stdout(&out), "residual");
    let expected = summary["final_residual"].as_f64().unwrap();
    assert!((residual - expected).abs() <= 1e-12, "{residual} vs {expected}");
    let rows = fs::read_to_string(&curv).unwrap().lines().count();
    assert_eq!(rows, 64 + 1);
}

#[test]
fn time_cap_and_divergence_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("sphere_expand.cfg");
    let dir = tmp.path().join("cap");
    let out = run(&["run", cfg.to_str().unwrap(), "--t-max", "0.5", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "TimeCap");
    assert_eq!(summary["t_final"].as_f64().unwrap(), 0.5);

    let text = fs::read_to_string(config("expanding_invalid.cfg")).unwrap().replace("radius = 1.0", "radius = 1.2");
    let p = write_config(tmp.path(), "grow.cfg", &text);
    let dir = tmp.path().join("grow");
    let out = run(&["run", p.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "Diverged");
}

#[test]
fn strict_mode_rejects_missing_barriers_before_stepping() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("strict");
    let cfg = config("expanding_invalid.cfg");
    let out = run(&["run", cfg.to_str().unwrap(), "--strict", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 65);
    assert!(!dir.join("history.csv").exists());
}

#[test]
fn config_errors_exit_64_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("sphere_expand.cfg")).unwrap().replace("dt_safety = 0.9", "dt_safety = 0");
    let p = write_config(tmp.path(), "bad.cfg", &text);
    let out = run(&["run", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 64);
    let err = stderr(&out);
    let line = text.lines().position(|l| l.starts_with("dt_safety")).unwrap() + 1;
    assert!(err.contains(&format!("line {line}")) && err.contains("dt_safety"), "{err}");

    let p = write_config(tmp.path(), "syntax.cfg", "[flow]\npsi = \"identity\"\nbeta = \n");
    let out = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = run(&["run", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 64);
}

#[test]
fn usage_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&[])), 64);
    assert_eq!(code(&run(&["run"])), 64);
}

#[test]
fn validate_reports() {
    let out = run(&["validate", config("sphere_expand.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("r1 = 1.000000000000 r2 = 1.000000000000"), "{text}");
    assert!(text.contains("coincide"));
    assert!(text.contains("stationary sphere radius: R = 1.000000000000"));
    assert!(text.contains("margin"));

    let out = run(&["validate", config("anisotropic.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains(&format!("r1 = {:.12}", (-0.2f64).exp())), "{text}");
    assert!(text.contains(&format!("r2 = {:.12}", 0.2f64.exp())), "{text}");
    assert!(!text.contains("stationary sphere radius"));

    let out = run(&["validate", config("expanding_invalid.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("a + b + beta"));
}

#[test]
fn selfcheck_codes() {
    for suite in ["sympoly", "grid", "geometry"] {
        let out = run(&["selfcheck", suite, "--seed", "3"]);
        assert_eq!(code(&out), 0, "{}", stdout(&out));
        assert!(stdout(&out).lines().all(|l| l.starts_with("PASS ")));
    }
    assert_eq!(code(&run(&["selfcheck", "nope"])), 64);
}

#[test]
fn curvature_of_stationary_sphere_and_bad_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("sphere_expand.cfg");
    let gamma = tmp.path().join("zero.csv");
    let mut text = String::from("theta,gamma\n");
    for i in 0..64 {
        text.push_str(&format!("{},0\n", (i as f64 + 0.5) * std::f64::consts::PI / 64.0));
    }
    fs::write(&gamma, &text).unwrap();
    let out = run(&["curvature", gamma.to_str().unwrap(), cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(field(&stdout(&out), "residual"), 0.0);
    assert!(tmp.path().join("zero_curvature.csv").exists());

    let short: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    fs::write(&gamma, short).unwrap();
    assert_eq!(code(&run(&["curvature", gamma.to_str().unwrap(), cfg.to_str().unwrap()])), 65);
    assert_eq!(code(&run(&["curvature", tmp.path().join("none.csv").to_str().unwrap(), cfg.to_str().unwrap()])), 65);
}
