//! Runs the `dirac-kit` binary against the bundled scenarios.

use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    root.to_str().unwrap().to_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac-kit")).args(args).env_remove("DIRAC_KIT_SEED").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn checks(v: &Value) -> &Vec<Value> {
    v["checks"].as_array().unwrap()
}

#[test]
fn empty_scenario_reports_no_checks() {
    let out = run(&["verify", &scenario("empty.json"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(checks(&json(&out)).is_empty());
}

#[test]
fn broken_jacobi_exits_one_with_witness() {
    let out = run(&["verify", &scenario("broken_jacobi.json"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let c = &checks(&v)[0];
    assert_eq!(c["pass"], false);
    assert!(c["witness"].as_str().unwrap().contains("Jacobi"));
}

#[test]
fn bundled_group_scenarios_pass() {
    for name in ["cartan_dirac_su2.json", "gauss_dirac_sl2.json"] {
        let out = run(&["verify", &scenario(name), "--samples", "8", "--format", "json"]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        let v = json(&out);
        assert!(checks(&v).iter().all(|c| c["pass"] == true));
        assert!(checks(&v).len() > 10, "{name}");
    }
}

#[test]
fn same_seed_gives_identical_json() {
    let args = ["catalog", "g0_moment", "--samples", "6", "--seed", "11", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["catalog", "g0_moment", "--samples", "6", "--seed", "12", "--format", "json"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn seed_is_read_from_the_environment() {
    let flag = run(&["catalog", "polwie", "--samples", "4", "--seed", "99", "--format", "json"]);
    let env = Command::new(env!("CARGO_BIN_EXE_dirac-kit"))
        .args(["catalog", "polwie", "--samples", "4", "--format", "json"])
        .env("DIRAC_KIT_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn every_catalog_name_is_accepted() {
    for name in ["polwie", "amm", "arrows", "gauss_cartan", "g0_moment", "luwei", "weil_sl2", "doubles"] {
        let out = run(&["catalog", name, "--samples", "3"]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.lines().last().unwrap().ends_with("0 failed"), "{name}");
    }
}

#[test]
fn bad_input_exits_two() {
    let dir = std::env::temp_dir().join(format!("dirac-kit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cases = [
        ("syntax.json", "{ not json"),
        ("version.json", r#"{"schema_version": 9}"#),
        ("unknown_op.json", r#"{"schema_version": 1, "checks": [{"op": "nope"}]}"#),
        ("missing_ref.json", r#"{"schema_version": 1, "checks": [{"op": "quadratic", "algebra": "absent"}]}"#),
    ];
    for (name, body) in cases {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        let out = run(&["verify", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{name}");
    }
    assert_eq!(run(&["verify", dir.join("absent.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["catalog", "nope"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}
