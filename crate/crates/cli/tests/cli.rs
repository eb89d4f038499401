//! End-to-end tests of the `wulff` binary: exit codes, report shape,
//! environment overrides and rerun determinism.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wulff"));
    // Strip ambient WULFF_* overrides so runs are reproducible.
    for (key, _) in std::env::vars() {
        if key.starts_with("WULFF_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wulff-cli-{name}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &PathBuf, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SPHERE_CONFIG: &str = "\
[ambient]
model = sphere-product
p = 2
q = 2

[lagrangian]
family = constant

[surface]
kind = sphere
radius = 0.3
resolution = 16

[run]
seed = 7
";

const TORUS_CONFIG: &str = "\
[ambient]
model = euclidean
dim = 3

[lagrangian]
family = quadratic-form
diagonal = 1.0, 1.21, 0.81

[surface]
kind = torus
big-radius = 2.0
small-radius = 0.75
resolution = 16

[flow]
steps = 3
dt = 0.0005
";

fn run_ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn sphere_spectrum_reports_closed_and_numeric_eigenvalues() {
    let dir = scratch("spectrum");
    let config = write_config(&dir, "sphere.ini", SPHERE_CONFIG);
    let output = bin()
        .args(["sphere", "spectrum", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    run_ok(&output);

    let body: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(body["tool"], "wulff");
    assert_eq!(body["command"], "sphere spectrum");
    assert_eq!(body["version"], env!("CARGO_PKG_VERSION"));
    let config_text = body["config"].as_str().unwrap();
    assert!(config_text.contains("model = sphere-product"));
    assert!(config_text.contains("seed = 7"));

    let data = &body["data"];
    assert_eq!(data["pass"], true);
    let entries = data["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for entry in entries {
        assert!(entry["closed_form"].is_f64());
        assert!(entry["numeric"].is_f64());
        assert!(entry["delta"].as_f64().unwrap() <= 1e-4);
    }
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = scratch("determinism");
    let config = write_config(&dir, "sphere.ini", SPHERE_CONFIG);
    let run = || {
        let output = bin()
            .args(["sphere", "afr", "--config"])
            .arg(&config)
            .output()
            .unwrap();
        run_ok(&output);
        output.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn flow_csv_bodies_are_deterministic() {
    let dir = scratch("flow");
    let config = write_config(&dir, "torus.ini", TORUS_CONFIG);
    let csv = |out_name: &str| {
        let out_dir = dir.join(out_name);
        let output = bin()
            .args(["flow", "run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        run_ok(&output);
        fs::read(out_dir.join("flow-run.csv")).unwrap()
    };
    let first = csv("a");
    assert!(first.starts_with(b"step,energy,max_abs_hf,hf_spread,dt,halvings\n"));
    assert_eq!(first, csv("b"));
}

#[test]
fn environment_overrides_reach_the_report() {
    let dir = scratch("env");
    let config = write_config(&dir, "sphere.ini", SPHERE_CONFIG);
    let output = bin()
        .args(["sphere", "spectrum", "--config"])
        .arg(&config)
        .env("WULFF_RUN_SEED", "99")
        .env("WULFF_SPECTRUM_THETA", "0.4")
        .output()
        .unwrap();
    run_ok(&output);
    let body: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(body["config"].as_str().unwrap().contains("seed = 99"));
    assert_eq!(body["data"]["params"][0].as_f64().unwrap(), 0.4);
}

#[test]
fn malformed_configs_exit_2_with_a_line_number() {
    let dir = scratch("badcfg");
    let config = write_config(&dir, "bad.ini", "[ambient\nmodel = euclidean\n");
    let output = bin()
        .args(["sphere", "build", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 1"), "stderr: {stderr}");
}

#[test]
fn surface_kind_must_match_the_command_group() {
    let dir = scratch("kind");
    let config = write_config(&dir, "sphere.ini", SPHERE_CONFIG);
    let output = bin()
        .args(["tube", "spectrum", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("kind = tube"));
}

#[test]
fn failed_checks_exit_1() {
    let dir = scratch("tol");
    let config = write_config(&dir, "sphere.ini", SPHERE_CONFIG);
    let output = bin()
        .args(["sphere", "spectrum", "--tol", "1e-13", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let body: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(body["data"]["pass"], false);
    assert_eq!(body["data"]["tolerance"].as_f64().unwrap(), 1e-13);
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let output = bin().args(["sphere", "build"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--config"));
}
