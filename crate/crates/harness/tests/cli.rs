//! Exit codes and output files of the `assembly` binary.

use std::process::Command;

fn assembly(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_assembly")).args(args).output().unwrap()
}

#[test]
fn run_exit_codes() {
    assert_eq!(assembly(&["run", "--scenario", "handover", "--seed", "2"]).status.code(), Some(0));
    assert_eq!(
        assembly(&["run", "--scenario", "ramp8", "--seed", "0", "--max-steps", "5"]).status.code(),
        Some(3)
    );
    assert_eq!(assembly(&["run", "--scenario", "no/such/file.scenario"]).status.code(), Some(2));
    assert_eq!(assembly(&["run", "--scenario", "ramp8", "--ts", "-1"]).status.code(), Some(2));
    assert_eq!(assembly(&["run"]).status.code(), Some(2));
}

#[test]
fn batch_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = out.to_str().unwrap();
    let b = assembly(&["batch", "--scenario", "arrow4", "--runs", "4", "--base-seed", "3", "--out", o]);
    assert_eq!(b.status.code(), Some(0), "{}", String::from_utf8_lossy(&b.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(summary["converged"], 4);

    let curves = assembly_harness::read_plot_data(&out.join("traces.csv")).unwrap();
    assert_eq!(curves.len(), 4);
    assert!(out.join("runs/seed_5.jsonl").exists());

    let r = assembly(&["report", "--in", o]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("4/4 runs converged") && text.contains("RMSE"), "{text}");

    assert_eq!(assembly(&["report", "--in", dir.path().join("missing").to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(assembly(&["batch", "--scenario", "arrow4", "--runs", "0", "--out", o]).status.code(), Some(2));
}
