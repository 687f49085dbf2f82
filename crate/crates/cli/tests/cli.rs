use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn krauscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krauscope"))
        .args(args)
        .env_remove("KRAUSCOPE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn no_arguments_prints_usage() {
    let out = krauscope(&[]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr) + String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(krauscope(&["characterize", "qutrit"]).status.code(), Some(2));
    assert_eq!(krauscope(&["characterize", "kraus", "--format", "xml"]).status.code(), Some(2));
    let out = krauscope(&["characterize", "kraus", "--mode", "exact", "--shots", "1000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn density_from_config_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind": "density", "d_s": 3, "seeds": [0, 1, 2, 3]}"#);
    let out = krauscope(&["characterize", "density", "--config", &cfg, "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert!(report["summary"]["max_frobenius_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["summary"]["runs"], 4);
    // the resolved config, defaults included, is embedded
    assert_eq!(report["config"]["input_lambda"], 0.3);
    assert_eq!(report["config"]["reference"]["dims"], serde_json::json!([3, 3]));
    assert!((report["config"]["theta"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"kind": "kraus", "d_s": 2, "seeds": [0], "mode": {"sampled": {"shots": -4}}}"#,
    );
    let out = krauscope(&["characterize", "kraus", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`shots`") && err.contains("$.mode.sampled.shots"), "{err}");
}

#[test]
fn incomplete_kraus_set_reports_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"kind": "kraus", "d_s": 2, "seeds": [0],
            "instance": {"explicit": {"operators": [
                {"dims": [2, 2], "entries": [[1, 0], [0, 0], [0, 0], [0, 0]]},
                {"dims": [2, 2], "entries": [[0, 0], [0, 0], [0, 0], [0.5, 0]]}]}}}"#,
    );
    let out = krauscope(&["characterize", "kraus", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("completeness") && err.contains("7.500e-1"), "{err}");
}

#[test]
fn kind_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind": "unitary", "d_s": 2, "seeds": [0]}"#);
    assert_eq!(krauscope(&["characterize", "density", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn failed_runs_exit_one_but_still_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"kind": "density", "d_s": 2, "seeds": [0],
            "reference": {"dims": [2, 2], "entries": [[1, 0], [0, 0], [0, 0], [1, 0]]}}"#,
    );
    let out = krauscope(&["characterize", "density", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["summary"]["failures"], 1);
}

#[test]
fn seed_flag_env_and_reproducibility() {
    let run = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_krauscope"));
        cmd.args(args).env_remove("KRAUSCOPE_SEED");
        if let Some(v) = env {
            cmd.env("KRAUSCOPE_SEED", v);
        }
        let mut report = stdout_json(&cmd.output().unwrap());
        report["wall_time_s"] = Value::Null;
        report
    };
    let base = ["characterize", "kraus", "--mode", "sampled", "--shots", "2000"];
    let a = run(&base, Some("11"));
    assert_eq!(a["config"]["seeds"], serde_json::json!([11]));
    assert_eq!(a, run(&base, Some("11")));
    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "5"]);
    let b = run(&with_flag, Some("11"));
    assert_eq!(b["config"]["seeds"], serde_json::json!([5]));
    assert_eq!(b["config"]["mode"], serde_json::json!({"sampled": {"shots": 2000}}));
    assert_ne!(a["runs"], b["runs"]);
}

#[test]
fn csv_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = krauscope(&[
        "characterize", "unitary", "--format", "csv", "--theta", "3.14159", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,sweep,estimator,i,j,k,re_est,im_est,re_true,im_true,abs_err");
    assert_eq!(lines.len(), 5);
}

#[test]
fn sweeps_from_defaults() {
    let out = krauscope(&["sweep", "dtheta"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let s = &report["sweep"];
    assert_eq!(s["axis"], "delta_theta");
    assert!((s["first_order_slope"].as_f64().unwrap() - 1.0).abs() < 0.2);
    assert!((s["refined_slope"].as_f64().unwrap() - 2.0).abs() < 0.2);

    let out = krauscope(&["sweep", "shots", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let s = &stdout_json(&out)["sweep"];
    assert_eq!(s["axis"], "shots");
    assert!((s["slope"].as_f64().unwrap() + 0.5).abs() <= 0.15);
}

#[test]
fn sweep_axis_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kind": "observable", "d_s": 2, "seeds": [0]}"#);
    assert_eq!(krauscope(&["sweep", "dtheta", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn demo_prints_both_kraus_operators_and_common_povm() {
    let out = krauscope(&["demo", "povm-ambiguity"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("+0.7071+0.0000i"));
    assert!(text.contains("-0.5000+0.0000i"));
    assert_eq!(text.matches("[ +0.5000+0.0000i  +0.0000+0.0000i ]").count(), 2);

    let out = krauscope(&["demo", "povm-ambiguity", "--format", "json"]);
    let v = stdout_json(&out);
    assert!(v["povm_error"].as_f64().unwrap() <= 1e-9);
    assert!(v["kraus_distance"].as_f64().unwrap() > 0.5);
}

#[test]
fn verify_passes() {
    let out = krauscope(&["verify"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains("[PASS]")).count(), 8, "{text}");
}
