use std::path::Path;
use std::process::{Command, Output};

fn mtm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TINY: &str = r#"{"points": ["a", "b"], "traces": [["a","b"], ["a","a","b"], ["b","a"]]}"#;

#[test]
fn manhattan_two_is_uniform() {
    let o = mtm(&["manhattan", "--n", "2", "--convention", "B", "--exact"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(text.lines().next(), Some("i,j,probability"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with(",1/4")));
}

#[test]
fn non_endless_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"points": ["a", "b"], "traces": [["a","b"]]}"#);
    let o = mtm(&["generic", "--model", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).trim(), "NotEndless: point b");
}

#[test]
fn generic_spatial_and_destination() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "tiny.json", TINY);
    let o = mtm(&["generic", "--model", &m, "--spatial", "--dest", "a"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("spatial,0,a,3/5"));
    assert!(text.contains("spatial,1,b,2/5"));
    assert!(text.contains("destination@a,"));
    let json = mtm(&["generic", "--model", &m, "--format", "json", "--mode", "float"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let p: f64 = v[0]["probability"].as_str().unwrap().parse().unwrap();
    assert!((p - 0.6).abs() < 1e-12);
}

#[test]
fn verify_manhattan_passes() {
    let o = mtm(&["verify", "--suite", "manhattan", "--max-n", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn validation_errors_exit_one() {
    assert_eq!(mtm(&["manhattan", "--n", "1"]).status.code(), Some(1));
    assert_eq!(mtm(&["downtown", "--n", "3"]).status.code(), Some(1));
    assert_eq!(mtm(&["verify", "--suite", "nope"]).status.code(), Some(1));
    let o = mtm(&["manhattan", "--n", "3", "--convention", "B", "--closed-form"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn downtown_exports_cells_and_errata() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("errata.json");
    let o = mtm(&["downtown", "--n", "2", "--m", "1", "--errata-report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("role,i,j,stripe,k,probability"));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["n"], 2);
    assert!(r["entries"].as_array().is_some());
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "tiny.json", TINY);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_mtm"))
            .env("MTM_THREADS", threads)
            .args(["simulate", "--model", &m, "--agents", "20000", "--steps", "3", "--seed", "5"])
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = dir.path().join("s.csv");
    let o = mtm(&["manhattan", "--n", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), mtm(&["manhattan", "--n", "4"]).stdout);
}
