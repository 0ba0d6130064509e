use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kipa-lab")).args(args).env_remove("KIPA_LAB_LOG").output().unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn num(v: &Value, key: &str) -> f64 {
    v["results"][key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

#[test]
fn design_reproduces_reference_coupling() {
    let cfg = fixture("reference_design.json");
    let v = json_ok(&["design", "--config", cfg.to_str().unwrap()]);
    assert!((num(&v, "q_c") - 290.0).abs() <= 1.0);
    assert!((num(&v, "kappa_hz") - 19.8e6).abs() <= 0.2e6);
    assert_eq!(v["provenance"]["tool"], "kipa-lab");
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "missing.json", r#"{"sif": {"z_l": 450.0, "z_h": 900.0}}"#);
    let out = run(&["design", "--config", &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing field"));

    let unknown = write(dir.path(), "unknown.json", r#"{"sfi": {}}"#);
    assert_eq!(code(&["design", "--config", &unknown]), 2);
    assert_eq!(code(&["design", "--config", "/nonexistent/config.json"]), 2);
    assert_eq!(code(&["noise-fit"]), 2);
    assert_eq!(code(&["gain", "--synthetic", "--data", "x.csv"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    let bad_csv = write(dir.path(), "bad.csv", "a,b\n1,2\n");
    assert_eq!(code(&["noise-fit", "--data", &bad_csv]), 2);
}

#[test]
fn degenerate_design_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flat.json",
        r#"{"sif": {"z_l": 450.0, "z_h": 450.0, "n_l": 6, "n_h": 5, "z_0": 50.0, "z_r": 900.0, "f_0": 5.75e9}}"#,
    );
    let v = json_ok(&["design", "--config", &cfg]);
    assert!(num(&v, "q_c").is_finite());
    assert!(!v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn fit_and_domain_errors() {
    // below the transmission floor
    assert_eq!(code(&["squeeze", "--s-measured", "0.5"]), 3);
    // beyond the critical current
    assert_eq!(code(&["tune", "--current", "1e-3"]), 4);
    let dir = tempfile::tempdir().unwrap();
    let narrow = write(dir.path(), "narrow.csv", "x,y\n1.0,1e-14\n1.5,1.2e-14\n2.0,1.4e-14\n");
    assert_eq!(code(&["noise-fit", "--data", &narrow]), 3);
    let hard = write(dir.path(), "hard.json", r#"{"pump_search": {"target_db": 60.0, "search": {"f_min_hz": 11.3e9, "f_max_hz": 11.4e9, "n_coarse": 5, "p_min_dbm": -20.0, "p_max_dbm": -10.0, "p_step_db": 1.0, "f_resolution_hz": 1e4, "p_tolerance_db": 1e-6}}}"#);
    let out = run(&["pump-search", "--config", &hard]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not reached"));
}

#[test]
fn tune_at_zero_bias_is_bare_resonance() {
    let v = json_ok(&["tune", "--current", "0"]);
    assert_eq!(v["results"]["points"][0]["f_r_hz"].as_f64().unwrap(), 5.75e9);
}

#[test]
fn synthetic_gain_recovers_kappa() {
    for seed in ["1", "2", "3"] {
        let v = json_ok(&["gain", "--synthetic", "--seed", seed]);
        assert_eq!(v["results"]["kappa_within_3_sigma"], true, "{}", v["results"]);
    }
}

#[test]
fn noise_fixture_reproduces_plant() {
    let data = fixture("noise_reference.csv");
    let chain = fixture("reference_chain.json");
    let v = json_ok(&["noise-fit", "--data", data.to_str().unwrap(), "--config", chain.to_str().unwrap()]);
    assert!((num(&v, "t_kipa_k") - 0.286).abs() < 1e-9);
    assert!((num(&v, "t_kipa_photons") - 1.04).abs() < 0.02 * 1.04);
}

#[test]
fn synthetic_hemt_and_field() {
    let v = json_ok(&["hemt-fit", "--synthetic", "--seed", "5"]);
    assert!((num(&v, "t_hemt_k") - 1.95).abs() <= 3.0 * num(&v, "t_hemt_sigma_k"));
    let v = json_ok(&["field-shift"]);
    assert!((num(&v, "curvature_per_t2") / 1.74e-3 - 1.0).abs() < 0.01);
}

#[test]
fn compression_bookkeeping() {
    let v = json_ok(&["compression", "--p-in-1db-dbm", "-86"]);
    assert!((num(&v, "p_out_sat_dbm") + 65.0).abs() <= 1.0);
    let v = json_ok(&["compression", "--synthetic"]);
    assert!((num(&v, "p_in_1db_dbm") + 86.0).abs() < 0.05);
}

#[test]
fn reproduce_fixtures() {
    let v = json_ok(&["reproduce", "qc290"]);
    assert_eq!(v["results"]["passed"], true);
    let v = json_ok(&["reproduce", "smin"]);
    assert_eq!(v["results"]["passed"], true);
    assert!((v["results"]["measured"].as_f64().unwrap() - 0.9895).abs() < 1e-4);
    let v = json_ok(&["reproduce", "all"]);
    assert_eq!(v["results"]["all_passed"], true);
    let out = run(&["reproduce", "nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown fixture"));
}

#[test]
fn same_seed_same_bytes() {
    for cmd in ["gain", "noise-fit", "hemt-fit", "tune", "compression"] {
        let a = run(&[cmd, "--synthetic", "--seed", "42"]).stdout;
        let b = run(&[cmd, "--synthetic", "--seed", "42"]).stdout;
        assert!(!a.is_empty());
        assert_eq!(a, b, "{cmd}");
    }
    let a = run(&["noise-fit", "--synthetic", "--seed", "1"]).stdout;
    let b = run(&["noise-fit", "--synthetic", "--seed", "2"]).stdout;
    assert_ne!(a, b);
}

#[test]
fn hash_ignores_key_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"squeeze": {"budget": {"eta": 0.35, "n_h": 3.25}, "g_x_db": [-1.0]}, "seed": 3}"#);
    let b = write(dir.path(), "b.json", r#"{"seed": 3, "squeeze": {"g_x_db": [-1.0], "budget": {"n_h": 3.25, "eta": 0.35}}}"#);
    let c = write(dir.path(), "c.json", r#"{"seed": 3, "squeeze": {"g_x_db": [-1.0], "budget": {"n_h": 3.5, "eta": 0.35}}}"#);
    let h = |p: &str| json_ok(&["squeeze", "--config", p])["provenance"]["config_hash"].clone();
    assert_eq!(h(&a), h(&b));
    assert_ne!(h(&a), h(&c));
}

#[test]
fn out_directory_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = run(&["temp-shift", "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0));
    assert!(status.stdout.is_empty());
    let mut names: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["temp-shift.csv", "temp-shift.json"]);

    let csv = run(&["squeeze", "--format", "csv"]).stdout;
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("g_x_db,s\n"));
    assert!(text.ends_with('\n'));
    let scalar = String::from_utf8(run(&["design", "--format", "csv"]).stdout).unwrap();
    assert!(scalar.lines().any(|l| l.starts_with("q_c,")));
}

#[test]
fn remaining_subcommands_run() {
    for args in [
        vec!["pump-search"],
        vec!["chain-propagate"],
        vec!["temp-shift"],
        vec!["device-temp", "--shift", "-1e-5"],
        vec!["tune", "--synthetic"],
        vec!["field-shift", "--synthetic"],
    ] {
        json_ok(&args);
    }
    assert_eq!(code(&["device-temp", "--shift", "1e-3"]), 3);
}
