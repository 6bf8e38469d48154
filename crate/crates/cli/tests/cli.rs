use std::path::PathBuf;
use std::process::{Command, Output};

use ctrlsynth::{parse_decimal, FixedPointFormat, FixedPointValue, Rounding};

fn bench(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("benchmarks").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctrlsynth")).args(args).output().unwrap()
}

fn path(name: &str) -> String {
    bench(name).to_string_lossy().into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let cruise = path("cruise.txt");
    let fragile = run(&["verify", &cruise, "--controller", &path("cruise_fragile.ctrl")]);
    assert_eq!(fragile.status.code(), Some(1));
    let robust = run(&["verify", &cruise, "--controller", &path("cruise_robust.ctrl"), "--report", "json"]);
    assert_eq!(robust.status.code(), Some(0));
    let v = json(&robust);
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["verdict"], "stable");
    assert_eq!(v["margins"][1]["phase_margin_deg"], "inf");
}

#[test]
fn bad_input_exits_with_two() {
    let dir = std::env::temp_dir().join(format!("ctrlsynth-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.txt");
    std::fs::write(&bad, "name = x\nden = 1, 0.5q\n").unwrap();
    let out = run(&["synth", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2, column 10"), "{err}");
    assert_eq!(run(&["synth", "/nonexistent/bench.txt"]).status.code(), Some(2));
    assert_eq!(run(&["synth", &path("cruise.txt"), "--engine", "three"]).status.code(), Some(2));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn iteration_limit_is_a_failure() {
    let out = run(&["synth", &path("cruise.txt"), "--max-iters", "0", "--report", "json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["failure"], "IterationLimit");
}

#[test]
fn reported_decimals_round_trip() {
    let out = run(&["synth", &path("cruise.txt"), "--report", "json", "--no-timing"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v.get("wall_time_s").is_none());
    let format = FixedPointFormat::new(4, 16).unwrap();
    for c in v["controller"]["num"].as_array().unwrap().iter().chain(v["controller"]["den"].as_array().unwrap()) {
        let x = parse_decimal(c["decimal"].as_str().unwrap()).unwrap();
        let q = FixedPointValue::quantize(&x, format, Rounding::Truncate).unwrap();
        assert_eq!(q.raw() as i64, c["raw"].as_i64().unwrap());
        assert_eq!(q.to_rational(), x);
    }
}

#[test]
fn repeated_runs_print_identical_reports() {
    let args = ["synth", &path("cruise.txt"), "--report", "json", "--no-timing", "--seed", "5"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn trace_is_written_as_csv() {
    let file = std::env::temp_dir().join(format!("ctrlsynth-trace-{}.csv", std::process::id()));
    let out = run(&[
        "verify",
        &path("cruise.txt"),
        "--controller",
        &path("cruise_robust.ctrl"),
        "--trace-out",
        file.to_str().unwrap(),
        "--steps",
        "50",
        "--noise",
        "worst-case",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&file).unwrap();
    assert!(csv.starts_with("k,t,r,e,u,y\n"));
    assert_eq!(csv.lines().count(), 51);
    std::fs::remove_file(file).unwrap();
}

#[test]
fn unstabilizable_family_reports_no_candidate() {
    let out = run(&["synth", &path("cruise_uncertain.txt"), "--report", "json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["failure"], "NoCandidate");
}
