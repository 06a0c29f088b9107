use std::path::Path;
use std::process::{Command, Output};

fn ews(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ews"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn ews")
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["simulate", "fit", "label", "train", "predict", "evaluate", "backtest"] {
        let out = ews(dir.path(), &[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help");
        assert!(String::from_utf8_lossy(&out.stdout).contains("--out"));
    }
}

#[test]
fn missing_input_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = ews(dir.path(), &["fit", "--input", "nope.csv", "--out", "p.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ews(dir.path(), &["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(ews(dir.path(), &["predict", "--input", "x", "--out", "y", "--retrain", "weekly"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "window = 0\n").unwrap();
    let out = ews(dir.path(), &["--config", "bad.toml", "simulate", "--t", "50", "--out", "p.csv"]);
    assert!(out.status.success(), "simulate ignores pipeline settings");
    let out = ews(dir.path(), &["--config", "bad.toml", "predict", "--input", "p.csv", "--out", "w.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn undefined_metric_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let header = "step,date,target_date,prob_high,cutoff,predicted,signal,true_label,in_test,suppressed,estimation_failed,input_digest";
    let row = |d: u32| format!("{d},2020-01-{d:02},2020-01-{:02},0.1,0.5,0.2,0,0,true,false,false,x", d + 1);
    let body: Vec<String> = (1..6).map(row).collect();
    std::fs::write(dir.path().join("w.csv"), format!("{header}\n{}\n", body.join("\n"))).unwrap();
    let out = ews(dir.path(), &["evaluate", "--warnings", "w.csv", "--out", "e.toml"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn chain_produces_outputs_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "refit_stride = 25\nwarmup = 50\n[train]\nepochs = 3\nhidden = 4\n").unwrap();
    let run = |args: &[&str]| {
        let mut full = vec!["--config", "c.toml", "--seed", "42"];
        full.extend_from_slice(args);
        let out = ews(d, &full);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["simulate", "--t", "200", "--out", "p.csv"]);
    run(&["fit", "--input", "p.csv", "--out", "params.toml", "--starts", "2"]);
    run(&["label", "--input", "p.csv", "--params", "params.toml", "--out", "l.csv"]);
    run(&["train", "--input", "p.csv", "--params", "params.toml", "--labels", "l.csv", "--out", "m.txt", "--predictor", "bpnn"]);
    run(&["predict", "--input", "p.csv", "--out", "w.csv", "--retrain", "once"]);
    run(&["evaluate", "--warnings", "w.csv", "--out", "e.toml", "--truth", "p.csv", "--all"]);
    run(&["backtest", "--input", "p.csv", "--warnings", "w.csv", "--out", "b.csv"]);

    let records = std::fs::read_to_string(d.join("w.csv")).unwrap();
    // header plus T - window decision days
    assert_eq!(records.lines().count(), 1 + 200 - 5);
    let report = std::fs::read_to_string(d.join("e.toml")).unwrap();
    assert!(report.contains("[metrics]") && report.contains("[onsets]"));
    let table = std::fs::read_to_string(d.join("b.csv")).unwrap();
    assert!(table.starts_with("model,expected_return,stdev,sharpe"));
    assert!(std::fs::read_to_string(d.join("m.txt")).unwrap().contains("kind bpnn"));
    for f in ["p.csv", "params.toml", "l.csv", "m.txt", "w.csv", "e.toml", "b.csv"] {
        let m = std::fs::read_to_string(d.join(format!("{f}.manifest.toml"))).unwrap();
        assert!(m.contains("command = ") && m.contains("seed = 42"), "{f}");
    }
}
