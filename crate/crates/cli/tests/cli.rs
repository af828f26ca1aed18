use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fixrank::harness::{generate_problem, ExperimentConfig, ExperimentSummary};
use fixrank::io::{dense_from_str, read_sampled};
use fixrank::solvers::CSV_HEADER;

const SMALL: [&str; 8] = ["--d1", "40", "--d2", "30", "--rank", "2", "--oversampling", "3"];

fn fixrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fixrank")).args(args).env_remove("FIXRANK_THREADS").output().expect("spawn fixrank")
}

fn with_small<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(SMALL.iter()).chain(tail.iter()).copied().collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_writes_matrix_market_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fixrank(&with_small(&["generate"], &["--instances", "2", "--seed", "9", "--out", out]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = ExperimentConfig { d1: 40, d2: 30, rank: 2, oversampling: 3.0, seed: 9, instances: 2, ..Default::default() };
    for i in 0..2 {
        let g = generate_problem(&cfg, i).unwrap();
        assert_eq!(&read_sampled(&dir.path().join(format!("i{i}_train.mtx"))).unwrap(), g.problem.train());
        assert_eq!(&read_sampled(&dir.path().join(format!("i{i}_test.mtx"))).unwrap(), g.problem.test().unwrap());
        let a = dense_from_str(&fs::read_to_string(dir.path().join(format!("i{i}_a.mtx"))).unwrap()).unwrap();
        assert_eq!(a, g.a);
    }
    let saved: ExperimentConfig = serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fixrank(&with_small(&["run"], &["--instances", "1", "--geometries", "gh,embedded", "--solvers", "tr", "--threads", "2", "--out", out]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("embedded"));
    for name in ["i0_gh_tr.csv", "i0_embedded_tr.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
    }
    let s: ExperimentSummary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.runs.len(), 2);
    assert_eq!(s.config.threads, Some(2));

    let o = fixrank(&["compare", out, "--level", "1e-8", "--csv"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    assert!(lines[1].starts_with("gh,tr,0,") && lines[2].starts_with("embedded,tr,0,"), "{csv}");
    let text = stdout(&fixrank(&["compare", out]));
    assert!(text.contains("gh") && text.contains("embedded"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, r#"{"d1": 40, "d2": 30, "rank": 2, "oversampling": 3.0, "seed": 4, "instances": 3}"#).unwrap();
    let out = dir.path().join("p");
    let o = fixrank(&["generate", "--config", cfg_path.to_str().unwrap(), "--instances", "1", "--no-test-set", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let saved: ExperimentConfig = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!((saved.seed, saved.instances, saved.test_set), (4, 1, false));
    assert!(!out.join("i0_test.mtx").exists());
    assert!(!out.join("i1_train.mtx").exists());
}

#[test]
fn check_reports_json_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = fixrank(&with_small(&["check"], &["--geometries", "gh,uy", "--out", report.to_str().unwrap()]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r["passed"] == true && r["hessian"].is_object()));

    // the Euclidean GH metric fails the orbit check, which the exit status reflects
    let o = fixrank(&with_small(&["check"], &["--geometries", "gh-euclidean"]));
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["passed"], false);
}

#[test]
fn bad_input_is_an_error() {
    let o = fixrank(&["run", "--d1", "5", "--d2", "5", "--rank", "3", "--oversampling", "9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples"));
    let o = fixrank(&["run", "--geometries", "gh,nope"]);
    assert!(!o.status.success());
    let o = fixrank(&["compare", "/nonexistent/dir"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fixrank(&with_small(&["check"], &["--instances", "1", "--instance", "1"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fixrank"))
        .args(with_small(&["run"], &["--instances", "1", "--out", dir.path().to_str().unwrap()]))
        .env("FIXRANK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FIXRANK_THREADS"));
    assert!(!Path::new(&dir.path().join("summary.json")).exists());
}
