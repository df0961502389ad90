use std::path::Path;
use std::process::{Command, Output};

fn nsqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsqp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn list_names_every_example() {
    let out = nsqp(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = text(&out.stdout)
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert_eq!(names, ["odl", "attack", "topology", "procrustes", "pde"]);
}

#[test]
fn run_from_config_file_writes_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("odl.conf");
    let log = dir.path().join("odl.csv");
    std::fs::write(
        &conf,
        format!(
            "example = odl\nseed = 2\nformat = csv\nout = {}\nexample.m = 250\n",
            path(&log)
        ),
    )
    .unwrap();
    let out = nsqp(&["run", "--config", path(&conf)]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let log_text = std::fs::read_to_string(&log).unwrap();
    let mut lines = log_text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,mu,phi,f,viol_ineq,viol_eq,stationarity,step,qp_status"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    let last: Vec<&str> = rows.last().unwrap().split(',').collect();
    assert_eq!(last[0].parse::<usize>().unwrap(), rows.len());
    let summary = std::fs::read_to_string(dir.path().join("odl.csv.summary")).unwrap();
    let mut summary = summary.lines();
    assert_eq!(
        summary.next().unwrap(),
        "example,termination,f,max_violation,iterations,wall_time,seed"
    );
    let values: Vec<&str> = summary.next().unwrap().split(',').collect();
    assert_eq!(values[0], "odl");
    assert_eq!(values[1], "converged");
    assert_eq!(values[4].parse::<usize>().unwrap(), rows.len());
    assert_eq!(values[6], "2");
}

#[test]
fn json_log_goes_to_stdout_without_out() {
    let out = nsqp(&["run", "topology", "--d", "2", "--x0", "feasible"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for line in text(&out.stdout).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["phi"].as_f64().is_some());
    }
    assert!(text(&out.stderr).contains("termination"));
}

#[test]
fn exit_codes_follow_the_outcome() {
    assert_eq!(
        nsqp(&["run", "odl", "--max-iter", "1"]).status.code(),
        Some(2)
    );
    let bad = nsqp(&["run", "odl", "--theta", "2"]);
    assert_eq!(bad.status.code(), Some(4));
    assert!(text(&bad.stderr).contains("example.theta"));
    assert_eq!(nsqp(&["run"]).status.code(), Some(4));
    assert_eq!(nsqp(&[]).status.code(), Some(4));
}

#[test]
fn check_verifies_all_examples() {
    let out = nsqp(&["check"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(
        text(&out.stdout)
            .lines()
            .filter(|l| l.ends_with(": ok"))
            .count(),
        5
    );
    let named = nsqp(&["check", "attack", "--mode", "min-distortion"]);
    assert_eq!(named.status.code(), Some(0), "{}", text(&named.stderr));
}
