//! Behavioral tests of the command-line interface: exit codes, formats,
//! file round-trips, and output-path resolution.

use std::path::Path;
use std::process::{Command, Output};

fn seqmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqmc"))
        .args(args)
        .env_remove("SEQMC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_decided_exits_zero() {
    let out = seqmc(&["run", "--method", "csm", "--p", "1", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("steps,successes,estimate,decision,stopped_by"));
    assert!(text.contains("3,3,1,accept_null,upper"), "{text}");
}

#[test]
fn run_truncated_exits_two() {
    let out = seqmc(&[
        "run", "--method", "csm", "--p", "0.05", "--max-steps", "10", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("no_decision"));
}

#[test]
fn errors_exit_one() {
    // invalid probability
    let out = seqmc(&["run", "--method", "csm", "--p", "2.0"]);
    assert_eq!(out.status.code(), Some(1));
    // conflicting sources
    let out = seqmc(&["run", "--method", "csm", "--p", "0.5", "--demo", "penguins"]);
    assert_eq!(out.status.code(), Some(1));
    // no source at all
    let out = seqmc(&["run", "--method", "csm"]);
    assert_eq!(out.status.code(), Some(1));
    // unreadable input file
    let out = seqmc(&["run", "--method", "csm", "--input", "/nonexistent/stream"]);
    assert_eq!(out.status.code(), Some(1));
    // unknown flag
    let out = seqmc(&["run", "--method", "csm", "--p", "0.5", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = seqmc(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("boundaries"));
}

#[test]
fn input_file_source() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.txt");
    // enough zeros for the all-zeros stopping step
    std::fs::write(&path, "0\n".repeat(300)).unwrap();
    let out = seqmc(&[
        "run", "--method", "csm", "--input", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("242,0,0,reject_null,lower"));

    // exhaustion before the stopping step is an error
    std::fs::write(&path, "0\n".repeat(100)).unwrap();
    let out = seqmc(&[
        "run", "--method", "csm", "--input", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("exhausted"));
}

#[test]
fn boundaries_file_round_trips_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bounds.txt");
    let out = seqmc(&[
        "boundaries", "--method", "simctest", "--n-max", "2000",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    // the cache loads and drives a run
    let out = seqmc(&[
        "run", "--method", "simctest", "--p", "0", "--bounds", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("reject_null"));

    // corrupt one row: the loader refuses it
    let text = std::fs::read_to_string(&path).unwrap().replace("5,-1,5", "5,9,5");
    std::fs::write(&path, text).unwrap();
    let out = seqmc(&[
        "run", "--method", "simctest", "--p", "0", "--bounds", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_first_step_identical() {
    let out = seqmc(&["compare", "--n-max", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let first = text.lines().nth(1).unwrap();
    assert_eq!(first, "1,-1,2,-1,2,1,0,0");
}

#[test]
fn risk_from_curve_sorts_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    std::fs::write(&path, "p,risk\n0.5,0.2\n0.1,0.05\n").unwrap();
    let out = seqmc(&["risk", "--from-curve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "p,risk\n0.1,0.05\n0.5,0.2\n");

    std::fs::write(&path, "p,risk\n0.5;0.2\n").unwrap();
    let out = seqmc(&["risk", "--from-curve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_lines_parse() {
    let out = seqmc(&[
        "run", "--method", "csm", "--p", "1", "--seed", "7", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let value: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(value["decision"], "accept_null");
    assert_eq!(value["steps"], 3);

    let out = seqmc(&["compare", "--n-max", "2", "--format", "json"]);
    for line in stdout(&out).lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(row["width_ratio"].is_number());
    }
}

#[test]
fn out_dir_env_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_seqmc"))
        .args(["boundaries", "--method", "csm", "--n-max", "5", "--out", "b.txt"])
        .env("SEQMC_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(Path::new(&dir.path().join("b.txt")).exists());
}

#[test]
fn effort_monotone_toward_threshold() {
    let out = seqmc(&[
        "effort", "--method", "csm", "--p-grid", "0.2,0.3", "--epsilon-list", "0.001",
        "--tail-tol", "1e-9", "--hard-cap", "100000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut rows = text.lines().skip(1).map(|l| {
        let f: Vec<&str> = l.split(',').collect();
        (f[1].parse::<f64>().unwrap(), f[2].parse::<f64>().unwrap())
    });
    let (p1, e1) = rows.next().unwrap();
    let (p2, e2) = rows.next().unwrap();
    assert!(p1 < p2 && e1 > e2, "effort should shrink away from the threshold");
}
