use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_testimony"))
}

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn small_corpus(dir: &Path) -> PathBuf {
    let c = dir.join("corpus");
    fs::create_dir_all(&c).unwrap();
    for f in ["Counter.mo", "Ledger.mo"] {
        fs::copy(corpus().join(f), c.join(f)).unwrap();
    }
    c
}

#[test]
fn measure_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_corpus(dir.path());
    let out = dir.path().join("out");
    let o = run(&["measure", "--corpus", c.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3", "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Counter") && stdout.contains("Ledger"));
    for f in ["report.json", "report.csv", "timings.json", "classes/Counter/runs.json", "classes/Ledger/matrix.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let counter = report["classes"].as_array().unwrap().iter().find(|c| c["name"] == "Counter").unwrap();
    assert_eq!(counter["contr"]["decimal"], "1.0000");
    assert_eq!(counter["obs"]["decimal"], "1.0000");

    let again = dir.path().join("again");
    let o = run(&[
        "measure", "--corpus", c.to_str().unwrap(), "--out", again.to_str().unwrap(), "--seed", "3",
        "--from-suites", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(out.join("report.json")).unwrap(), fs::read(again.join("report.json")).unwrap());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_corpus(dir.path());
    let out = dir.path().join("out");
    let o = run(&["measure", "--corpus", c.to_str().unwrap(), "--out", out.to_str().unwrap(), "--runs-per-fitness", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["measure", "--corpus", c.to_str().unwrap(), "--out", out.to_str().unwrap(), "--fitness", "coverage"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_corpus_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("bad");
    fs::create_dir_all(&c).unwrap();
    fs::copy(corpus().join("invalid/type_error__bool_to_int.mo"), c.join("A.mo")).unwrap();
    let o = run(&["measure", "--corpus", c.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("type_error"));
    let o = run(&["mutants", "--corpus", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn mutants_lists_records() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_corpus(dir.path());
    let o = run(&["mutants", "--corpus", c.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let files = v.as_array().unwrap();
    assert_eq!(files.len(), 2);
    let total: usize = files.iter().map(|f| f["mutants"].as_array().unwrap().len()).sum();
    assert_eq!(total, 8 + 13);
}

#[test]
fn oracle_check_writes_oracle_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["oracle-check", "--corpus", corpus().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Ledger: equal"), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(v["all_equal"], true);
}
