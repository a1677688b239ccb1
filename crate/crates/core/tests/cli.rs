use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spdnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn stability_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = spdnn(&["stability", "--config", &config("stability.json"), "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stability.json")).unwrap()).unwrap();
    assert_eq!(report["stable"], true);
}

#[test]
fn missing_or_malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = spdnn(&["simulate", "--config", "/nonexistent.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"process": {"kind": "ar"}, "n": 10}"#).unwrap();
    let o = spdnn(&["simulate", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_process_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"process": {"kind": "gexpar", "params": {"c0": 0, "c": [0.9, 0.3], "pi": [0.1, 0.1], "lambda": -1, "z": [0, 0]}}, "n": 100}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = spdnn(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn failed_lower_bound_check_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = spdnn(&["verify-lowerbound", "--config", &config("verify_lowerbound.json"), "--out", out]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lowerbound.json")).unwrap()).unwrap();
    for key in ["kappa", "phi_n", "min_pair_l2", "kl_budget", "log_M_over_9", "pass_i", "pass_ii"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let passed = report["pass_i"] == true && report["pass_ii"] == true;
    assert_eq!(o.status.code(), Some(if passed { 0 } else { 4 }));
}

#[test]
fn simulate_writes_csv_and_seed_override_changes_it() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = spdnn(&[
            "simulate",
            "--config",
            &config("simulate.json"),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(out.join("data.csv")).unwrap()
    };
    let a = run("1", "a");
    assert!(a.starts_with("t,y,x_1,x_2\n"));
    assert_eq!(a.lines().count(), 1001);
    assert_eq!(a, run("1", "b"));
    assert_ne!(a, run("2", "c"));
}
