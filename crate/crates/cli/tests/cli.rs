use std::path::PathBuf;
use std::process::{Command, Output};

use hyc_core::report::ReportFile;

fn hyc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyc")).args(args).env_remove("HYC_SEED").output().expect("binary runs")
}

fn model(file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(file).display().to_string()
}

fn write_model(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const UNREACHABLE: &str = r#"{
    "name": "unreachable",
    "variables": ["x"],
    "modes": { "a": ["1"], "b": ["0"], "bad": ["0"] },
    "transitions": [ { "source": "a", "guard": "x > 0.5", "target": "b" } ],
    "initial_mode": "a",
    "initial_box": { "x": [0, 1] },
    "negative": ["bad"]
}"#;

#[test]
fn exit_codes() {
    let osc = hyc(&["check", &model("oscillator.json"), "--seed", "7"]);
    assert_eq!(osc.status.code(), Some(2), "{}", String::from_utf8_lossy(&osc.stderr));
    let report = ReportFile::from_json(&String::from_utf8(osc.stdout).unwrap()).unwrap();
    assert!(report.run.counterexample.is_some());

    let dir = tempfile::tempdir().unwrap();
    let unreachable = write_model(&dir, "unreachable.json", UNREACHABLE);
    assert_eq!(hyc(&["check", &unreachable]).status.code(), Some(0));

    let malformed = write_model(&dir, "bad.json", &UNREACHABLE.replace("x > 0.5", "x >> 0.5"));
    let out = hyc(&["check", &malformed]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("transitions[0].guard"));

    assert_eq!(hyc(&["check", &model("oscillator.json"), "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(hyc(&["check", "/nonexistent/model.json"]).status.code(), Some(1));
    assert_eq!(hyc(&["check", &model("oscillator.json"), "--timeout", "0"]).status.code(), Some(1));
    assert_eq!(hyc(&["bench", "no-such-suite"]).status.code(), Some(1));
    assert_eq!(hyc(&["--help"]).status.code(), Some(0));
    assert_eq!(hyc(&["--version"]).status.code(), Some(0));
}

#[test]
fn inconclusive_when_the_budget_runs_out() {
    let out = hyc(&["check", &model("room_heating_2x1.json"), "--strategy", "random", "--samples", "32"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn seed_from_the_environment() {
    let flag = hyc(&["check", &model("sewerage.json"), "--seed", "4", "--points", "8"]);
    let env = Command::new(env!("CARGO_BIN_EXE_hyc"))
        .args(["check", &model("sewerage.json"), "--points", "8"])
        .env("HYC_SEED", "4")
        .output()
        .unwrap();
    let a = ReportFile::from_json(&String::from_utf8(flag.stdout).unwrap()).unwrap();
    let b = ReportFile::from_json(&String::from_utf8(env.stdout).unwrap()).unwrap();
    assert_eq!(a.seed, 4);
    assert_eq!(a.without_timing(), b.without_timing());
}

#[test]
fn report_goes_to_the_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let r = hyc(&["check", &model("oscillator.json"), "--out", &out.display().to_string()]);
    assert!(r.stdout.is_empty());
    let report = ReportFile::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report.model, "oscillator");
}

#[test]
fn simulate_writes_one_row_per_grid_point() {
    let out = hyc(&["simulate", &model("oscillator.json"), "--traces", "2", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trace,step,mode,t,x,v");
    // Each trace: K / h rows plus the final state.
    assert_eq!(lines.len(), 1 + 2 * (3 * 1000 + 1));
    assert!(lines[1].starts_with("0,0,q0,0,"));
    assert!(lines.last().unwrap().starts_with("1,3,"));
}

#[test]
fn simulate_histogram_shows_the_common_transitions() {
    let out = hyc(&["simulate", &model("sewerage.json"), "--traces", "200", "--histogram", "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("normal->draining"), "{err}");
    assert!(err.contains("normal->loading"), "{err}");
    assert!(!err.contains("normal->flooding"), "{err}");
}
