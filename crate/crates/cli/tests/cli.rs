use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn tpwn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpwn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn expected_time_of_example() {
    let out = tpwn(&["expected-time", path(&data("example.json"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().next(), Some("47/5 (= 9.4)"));
    assert!(stdout(&out).contains("chain states: 11"));
}

#[test]
fn expected_time_json_is_consistent() {
    let out = tpwn(&["expected-time", path(&data("example.json")), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["expected_time"], "47/5");
    assert_eq!(v["decimal"], "9.4");
    assert_eq!(v["chain_states"], 11);
}

#[test]
fn unsound_net_is_infinite() {
    let out = tpwn(&["expected-time", path(&data("unsound.json"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().next(), Some("infinite"));
    assert!(stderr(&out).contains("{p2,p4}"));
}

#[test]
fn check_reports_witness() {
    let out = tpwn(&["check", path(&data("unsound.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("sound:             no"));
    assert!(stderr(&out).contains("unreachable from {p2,p4}"));

    let out = tpwn(&["check", path(&data("example.json"))]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn confused_net_is_a_validation_failure() {
    let out = tpwn(&["expected-time", path(&data("confused.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("confusion"));
}

#[test]
fn pert_commands() {
    let out = tpwn(&["pert", "expected", path(&data("twopar.json"))]);
    assert_eq!(stdout(&out).trim(), "3/4");

    let out = tpwn(&["pert", "check", path(&data("cycle.pert.json"))]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let reduced = dir.path().join("reduced.json");
    let out = tpwn(&["pert", "reduce", "--unit-weights", path(&data("twopar.json")), "-o", path(&reduced)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = tpwn(&["expected-time", path(&reduced)]);
    assert_eq!(stdout(&out).lines().next(), Some("3/4 (= 0.75)"));
}

#[test]
fn chain_dot_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("chain.dot");
    let out = tpwn(&["chain", path(&data("example.json")), "--dot", path(&dot)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.contains("{p1:4,p4:5} r=4"));
}

#[test]
fn enumerate_and_simulate() {
    let out = tpwn(&["enumerate", path(&data("example.json")), "--mass-epsilon", "1/1000000000000"]);
    assert!(stdout(&out).starts_with("lower bound "));
    let out = tpwn(&["enumerate", path(&data("example.json")), "--max-depth", "40"]);
    assert_eq!(out.status.code(), Some(1));

    let a = tpwn(&["simulate", path(&data("example.json")), "--runs", "2000", "--seed", "7"]);
    let b = tpwn(&["simulate", path(&data("example.json")), "--runs", "2000", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("mean "));
}

#[test]
fn generate_is_deterministic_and_sound() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = tpwn(&["generate", "--places", "12", "--seed", "4", "--times", "1:5", "--weights", "1:3", "-o", path(p)]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(tpwn(&["check", path(&a)]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tpwn(&["bogus"]).status.code(), Some(2));
    assert_eq!(tpwn(&["generate", "--places", "3", "--seed", "1", "--times", "5:1"]).status.code(), Some(2));
    assert_eq!(tpwn(&["simulate", path(&data("example.json"))]).status.code(), Some(2));
}

#[test]
fn syntax_error_exit_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"places\": [\n").unwrap();
    let out = tpwn(&["check", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}
