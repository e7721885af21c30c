use std::path::Path;
use std::process::{Command, Output};

use mcmclab::experiment::CSV_HEADER;

fn mcmclab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcmclab"))
        .args(args)
        .current_dir(dir)
        .env_remove("MCMCLAB_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gaussian_check_prints_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcmclab(
        &["gaussian-check", "--gamma", "0.1", "--dim", "1", "--kernel", "ula", "--samples", "20000"],
        dir.path(),
    );
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("0.0259784"), "{text}");
    assert!(text.contains("z_score"));

    let o = mcmclab(
        &["gaussian-check", "--gamma", "0.2", "--dim", "100", "--kernel", "uhmc", "--samples", "2000"],
        dir.path(),
    );
    assert!(stdout(&o).contains("0.050378"), "{}", stdout(&o));
}

#[test]
fn invalid_step_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcmclab(&["gaussian-check", "--gamma", "0"], dir.path());
    assert_eq!(o.status.code(), Some(64));
    let o = mcmclab(&["gaussian-check", "--gamma", "0.1", "--kernel", "exact-hmc"], dir.path());
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kernel": {"kind": "ula", "gamma": 0.1}, "sede": 3}"#);
    let o = mcmclab(&["bounds", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));
}

#[test]
fn bounds_needs_a_contraction_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"kernel": {"kind": "ula", "gamma": 0.1}, "dimension": 3}"#);
    let o = mcmclab(&["bounds", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("contraction"));

    let cfg = write(
        dir.path(),
        "ok.json",
        r#"{"kernel": {"kind": "ula", "gamma": 0.1}, "dimension": 3,
            "bounds-inputs": {"ula": {"A": 1, "c": 1}}, "quantities": {"samples": 1000}}"#,
    );
    let o = mcmclab(&["bounds", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["bounds"]["thm5"].as_f64().unwrap() > 0.0);
    assert_eq!(report["key_quantities"]["M2"]["value"].as_f64(), Some(3.0));
}

const SCAN: &str = r#"{
    "model": {"kind": "gaussian"},
    "kernel": {"kind": "ula"},
    "sweep": {"dims": [1, 4], "gammas": [0.05, 0.1, 0.2], "samples": 2000},
    "seed": 9,
    "output": {"path": "scan.csv"}
}"#;

#[test]
fn bias_scan_is_byte_identical_and_has_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scan.json", SCAN);
    let o = mcmclab(&["bias-scan", "--config", &cfg], dir.path());
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{:?}", o);
    let first = std::fs::read(dir.path().join("scan.csv")).unwrap();
    mcmclab(&["bias-scan", "--config", &cfg], dir.path());
    let second = std::fs::read(dir.path().join("scan.csv")).unwrap();
    assert_eq!(first, second);

    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 6);

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scan.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["seed"], 9);
    assert!(sidecar["slope_fits"].as_array().unwrap().len() >= 2);
}

#[test]
fn seed_precedence_flag_env_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scan.json", SCAN);
    let seed_column = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_mcmclab"));
        c.args(["bias-scan", "--config", &cfg, "--out", "s.csv"]).args(extra).current_dir(dir.path());
        match env {
            Some(v) => c.env("MCMCLAB_SEED", v),
            None => c.env_remove("MCMCLAB_SEED"),
        };
        c.output().unwrap();
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        let row = text.lines().nth(1).unwrap().to_string();
        row.split(',').nth(13).unwrap().to_string()
    };
    assert_eq!(seed_column(&[], None), "9");
    assert_eq!(seed_column(&[], Some("4")), "4");
    assert_eq!(seed_column(&["--seed", "2"], Some("4")), "2");
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "div.json",
        r#"{"model": {"kind": "gaussian", "variance": 0.1}, "kernel": {"kind": "ula"},
            "sweep": {"dims": [2], "gammas": [0.5], "samples": 1000, "burn_in": 10}}"#,
    );
    let o = mcmclab(&["bias-scan", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("diverged at step"));
}

#[test]
fn coupling_emits_curve_with_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"dimension": 2, "kernel": {"kind": "ula", "gamma": 0.1},
            "coupling": {"horizon_steps": 10, "replicas": 2000}, "quantities": {"samples": 1000}}"#,
    );
    let o = mcmclab(&["coupling", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,t,rmse,stderr,mse,mse_stderr,bound,bound_kind");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[5].ends_with("stationary-start"));
}

#[test]
fn contraction_and_quantities_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"dimension": 3, "kernel": {"kind": "ula", "gamma": 0.1},
            "contraction": {"pairs": 4, "steps": 50}, "quantities": {"samples": 1000, "identity_points": 2}}"#,
    );
    let o = mcmclab(&["contraction", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // synchronous ULA on N(0, I) contracts by (1 - gamma) per step
    let rate = v["rate_per_unit_time"].as_f64().unwrap();
    assert!((rate - (-(0.9f64).ln() / 0.1)).abs() < 1e-9, "{rate}");

    let o = mcmclab(&["quantities", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["identities_hold"], true);
    assert_eq!(v["M"]["M4"]["value"].as_f64(), Some(0.0));
}
