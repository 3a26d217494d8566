use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

fn mq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mq")).args(args).output().expect("failed to start mq")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("output is not JSON")
}

#[test]
fn poisson_up_rate_is_one() {
    let v = json(&mq(&["rates", "--family", "poisson", "--t", "0.5", "--k", "3"]));
    let up = v["empirical"]["up_rate"].as_f64().unwrap();
    assert!((up - 1.0).abs() <= 5e-3, "up rate {up}");
    assert!((v["analytic"]["up_rate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn flag_coupling_is_independent() {
    let v = json(&mq(&["coupling", "--family", &fixture("flag"), "--s=-1", "--t", "1"]));
    let atoms = v["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 4);
    for a in atoms {
        assert!((a[2].as_f64().unwrap() - 0.25).abs() < 1e-12);
    }
}

#[test]
fn quantile_coupling_of_flag_is_diagonal() {
    let v = json(&mq(&["coupling", "--family", &fixture("flag"), "--s=-1", "--t", "1", "--process", "quantile"]));
    let atoms = v["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 2);
    assert!(atoms.iter().all(|a| a[0] == a[1]));
}

#[test]
fn check_passes_on_diffuse_family() {
    let out = mq(&["check", "--family", &fixture("diffuse"), "--cases", "20", "--paths", "4000"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("0 failed"));
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn essential_time_of_dirac_start() {
    let v = json(&mq(&["essential", "--family", &fixture("ex1_24"), "--interval", "0,0", "--probe=-0.5,0.5"]));
    assert_eq!(v["essential"], Value::Bool(true));
    let v = json(&mq(&["essential", "--family", &fixture("diffuse"), "--interval", "0.5,0.5", "--probe", "0.25,0.75"]));
    assert_eq!(v["essential"], Value::Bool(false));
}

#[test]
fn translation_has_unit_energy() {
    let v = json(&mq(&["energy", "--family", "uniform_shift", "--partition", "0,0.25,1"]));
    assert!((v["total"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(mq(&["rates", "--family", "no_such_family", "--t", "0.5", "--k", "1"]).status.code(), Some(2));
    assert_eq!(mq(&["coupling", "--family", &fixture("flag"), "--s", "1", "--t", "0.5"]).status.code(), Some(2));
    assert_eq!(mq(&["coupling", "--family", "/nonexistent/family.json", "--s", "0", "--t", "1"]).status.code(), Some(2));
}

#[test]
fn simulation_is_deterministic() {
    let args = ["simulate", "--family", &fixture("ex6_9"), "--grid", "0:1:8", "--n", "500", "--seed", "7"];
    let a = mq(&args);
    let b = mq(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 501);
    assert!(!text.contains('\r'));
}

#[test]
fn oracle_agrees_on_explicit_family() {
    let v = json(&mq(&["oracle", "--family", &fixture("flag"), "--bins", "256"]));
    assert_eq!(v["pass"], Value::Bool(true));
}
