mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn panelvox(args: &[&str], out: &Path) -> Output {
    let config = common::fixtures().join("run.toml");
    Command::new(env!("CARGO_BIN_EXE_panelvox"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn run_then_evaluate_and_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = panelvox(&["run"], out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("HoshinoKouen: 20 regions"));

    let preds = out.join("predictions.jsonl");
    let o = panelvox(&["evaluate", "--predictions", preds.to_str().unwrap()], out);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table, fs::read_to_string(out.join("report.txt")).unwrap());

    let o = panelvox(&["evaluate", "--predictions", preds.to_str().unwrap(), "--format", "csv"], out);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("label,"));

    let plan = out.join("plan.jsonl");
    let o = panelvox(&["tts-plan", "--predictions", preds.to_str().unwrap(), "--out", plan.to_str().unwrap()], out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(plan).unwrap(), fs::read(out.join("manifest.jsonl")).unwrap());
}

#[test]
fn ingest_layout_and_baseline_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(panelvox(&["ingest"], out).status.success());
    assert!(panelvox(&["layout", "--pages-limit", "2"], out).status.success());
    let layout = fs::read_to_string(out.join("layout.jsonl")).unwrap();
    assert_eq!(layout.lines().count(), 3);
    assert!(layout.contains("\"frame_sequence\""));
    assert!(panelvox(&["baseline", "--workers", "2"], out).status.success());
    assert!(out.join("report-rule_frame.txt").exists());
}

#[test]
fn aborted_title_sets_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = panelvox(&["attribute", "--seed", "999"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("aborted"));
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = panelvox(&["run", "--titles", "NoSuchTitle"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = panelvox(&["run", "--setting", "A"], dir.path());
    assert_eq!(o.status.code(), Some(2), "setting A with noisy identity is rejected");
}
