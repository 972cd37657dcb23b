use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdelay"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &TempDir, body: &str) -> std::path::PathBuf {
    let p = dir.path().join("config.json");
    fs::write(&p, body).unwrap();
    p
}

fn pendulum(extra: &str) -> String {
    format!(r#"{{"system": {{"kind": "pendulum"}}, "delta": 0.1, "r": 1.0, "eps": 0.3{extra}}}"#)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run("design", &dir.path().join("absent.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_qdelay"))
        .arg("plot")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_targets_are_rejected() {
    let dir = TempDir::new().unwrap();
    for body in [
        r#"{"system": {"kind": "pendulum"}, "delta": 0.1, "r": 1.0, "eps": 1.0}"#,
        r#"{"system": {"kind": "pendulum"}, "delta": 0.0, "r": 1.0, "eps": 0.3}"#,
        r#"{"system": {"kind": "pendulum"}, "delta": 0.1, "r": 1.0"#,
    ] {
        let cfg = write_config(&dir, body);
        let out = run("design", &cfg, &dir.path().join("o"));
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
}

#[test]
fn design_file_has_ordered_chain_and_hash() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &pendulum(""));
    let o = dir.path().join("o");
    let out = run("design", &cfg, &o);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&o.join("design.json"));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    let d = &v["design"];
    let f = |k: &str| d[k].as_f64().unwrap();
    assert!(f("omega_r") >= f("gamma_r") && f("gamma_r") >= f("alpha_r") && f("alpha_r") >= 1.0);
    assert!(d["j_min"].as_u64().unwrap() > 0);
    assert!((f("tau") - 0.9 * f("tau_max")).abs() < 1e-15);
}

#[test]
fn oversized_delay_warns_but_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &pendulum(r#", "tau": 0.01"#));
    let out = run("design", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn zero_initial_function_and_byte_identical_reruns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &pendulum(
            r#", "horizon": 0.5, "initial_functions": [{"kind": "constant", "value": [0, 0]}, {"kind": "ring", "count": 2, "radius": 0.1}]"#,
        ),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("simulate", &cfg, &a).status.code(), Some(0));
    assert_eq!(run("simulate", &cfg, &b).status.code(), Some(0));
    for name in [
        "trajectory_000.csv",
        "trajectory_001.csv",
        "trajectory_002.csv",
        "report.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(a.join("trajectory_000.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "t,x_1,x_2,u,psi,V,U,switch");
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 8);
        assert_eq!((cols[1], cols[2]), ("0", "0"));
    }
    let report = json(&a.join("report.json"));
    assert_eq!(report["runs"].as_array().unwrap().len(), 3);
    assert_eq!(
        report["runs"][0]["report"]["entry_time"].as_f64(),
        Some(0.0)
    );
}

#[test]
fn u_column_is_blank_before_two_delays() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &pendulum(
            r#", "horizon": 0.05, "output_stride": 1, "initial_functions": [{"kind": "constant", "value": [0.1, 0.1]}]"#,
        ),
    );
    let o = dir.path().join("o");
    assert_eq!(run("simulate", &cfg, &o).status.code(), Some(0));
    let design = {
        assert_eq!(run("design", &cfg, &o).status.code(), Some(0));
        json(&o.join("design.json"))
    };
    let tau = design["design"]["tau"].as_f64().unwrap();
    let csv = fs::read_to_string(o.join("trajectory_000.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let cols: Vec<&str> = line.split(',').collect();
        let t: f64 = cols[0].parse().unwrap();
        assert_eq!(cols[6].is_empty(), t < 2.0 * tau, "{line}");
    }
}

#[test]
fn sweep_is_decreasing_with_known_first_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &pendulum(""));
    let o = dir.path().join("o");
    assert_eq!(run("sweep", &cfg, &o).status.code(), Some(0));
    let csv = fs::read_to_string(o.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 99);
    assert!((rows[0][2] - 0.2471).abs() < 5e-4);
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]));
}

fn quick_verify(extra: &str) -> String {
    pendulum(&format!(
        r#", "horizon": 4.0, "quantizer_paths": 2000, "lemma_samples": 1000, "output_stride": 50{extra}"#
    ))
}

#[test]
fn verify_passes_on_stock_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &quick_verify(""));
    let o = dir.path().join("o");
    let out = run("verify", &cfg, &o);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v = json(&o.join("verify.json"));
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["scenarios"].as_array().unwrap().len(), 2);
}

#[test]
fn injected_bad_gain_fails_verification() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &quick_verify(r#", "feedback_scale": -1.0"#));
    let out = run("verify", &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[FAIL] decrease_condition"), "{stdout}");
}
