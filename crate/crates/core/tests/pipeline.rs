mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use common::{fixture_config, FIXTURE_TITLE};
use panelvox::attribution::{CassetteMode, LlmError, LlmRequest, ScriptedBackend};
use panelvox::perception::adapter::{
    check_conformance, AdapterClient, AdapterItem, AdapterOp, AdapterRequest, ProcessTransport,
};
use panelvox::pipeline::{
    read_predictions, run_baselines, run_pipeline, run_pipeline_with, AdapterConfig, IdentityChoice, LlmChoice,
    OcrChoice, RunConfig, Setting, Stages, TtsMode,
};
use panelvox::seed::derive_rng;
use rand::Rng;

const ECHO: &str = env!("CARGO_BIN_EXE_panelvox-echo-adapter");

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "config.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn scripted(cfg: &mut RunConfig, setting: Setting) {
    cfg.setting = setting;
    cfg.llm.backend = LlmChoice::Scripted;
    if setting != Setting::C {
        cfg.perception.identity = IdentityChoice::Oracle;
    }
}

#[test]
fn setting_a_prompts_carry_no_intensity() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(out.path());
    scripted(&mut cfg, Setting::A);
    run_pipeline(&cfg, Stages::ATTRIBUTE_ONLY).unwrap();
    let prompts = fs::read_to_string(out.path().join("prompts.jsonl")).unwrap();
    assert!(!prompts.contains("expression"));
    let perception = fs::read_to_string(out.path().join("perception.jsonl")).unwrap();
    assert!(!perception.contains("intensities"));
}

#[test]
fn setting_b_prompts_carry_intensity() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(out.path());
    scripted(&mut cfg, Setting::B);
    run_pipeline(&cfg, Stages::ATTRIBUTE_ONLY).unwrap();
    let prompts = fs::read_to_string(out.path().join("prompts.jsonl")).unwrap();
    assert!(prompts.contains("expression STRONG"));
    assert!(prompts.contains("expression NEUTRAL"));
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let mut runs = Vec::new();
    for workers in [1, 1, 4] {
        let out = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(out.path());
        scripted(&mut cfg, Setting::C);
        cfg.corpus.titles.clear();
        cfg.workers = workers;
        let summary = run_pipeline(&cfg, Stages::ALL).unwrap();
        assert_eq!(summary.exit_code(), 0);
        runs.push(read_dir(out.path()));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert!(runs[0].contains_key("report_confusion.png"));
}

#[test]
fn predictions_cover_every_text_once() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture_config(out.path());
    let summary = run_pipeline(&cfg, Stages::ATTRIBUTE_ONLY).unwrap();
    let preds = read_predictions(&fs::read_to_string(out.path().join("predictions.jsonl")).unwrap()).unwrap();
    let mut ids: Vec<&str> = preds.iter().map(|p| p.text_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), preds.len());
    assert_eq!(preds.len(), summary.titles[0].texts);
    // The recorded cassette contains one unreadable region.
    let fallback = preds.iter().filter(|p| p.flags.iter().any(|f| f == "parse_failure")).count();
    assert!(fallback > 0);
}

#[test]
fn strict_cassette_miss_aborts_the_title() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(out.path());
    // A different seed changes the noisy identities, so prompts no longer match.
    cfg.seed = 43;
    let summary = run_pipeline(&cfg, Stages::ALL).unwrap();
    assert_eq!(summary.exit_code(), 1);
    assert!(summary.titles[0].error.as_deref().unwrap().contains("cassette"));
    let run: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["titles"][0]["ok"], false);

    cfg.llm.cassette_mode = CassetteMode::Lenient;
    let summary = run_pipeline(&cfg, Stages::ALL).unwrap();
    assert_eq!(summary.exit_code(), 0);
}

#[test]
fn recording_then_replaying_reproduces_predictions() {
    let out = tempfile::tempdir().unwrap();
    let cassette = out.path().join("rec.jsonl");
    let mut cfg = fixture_config(&out.path().join("live"));
    cfg.llm.record = Some(cassette.clone());
    run_pipeline_with(&cfg, Stages::ATTRIBUTE_ONLY, Some(Box::new(common::stylized_llm))).unwrap();

    let mut replay = fixture_config(&out.path().join("replay"));
    replay.llm.cassette = Some(cassette);
    let summary = run_pipeline(&replay, Stages::ATTRIBUTE_ONLY).unwrap();
    assert_eq!(summary.exit_code(), 0);
    for name in ["predictions.jsonl", "prompts.jsonl"] {
        let a = fs::read_to_string(out.path().join("live").join(name)).unwrap();
        let b = fs::read_to_string(out.path().join("replay").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn transport_failures_are_not_recorded() {
    let out = tempfile::tempdir().unwrap();
    let cassette = out.path().join("rec.jsonl");
    let mut cfg = fixture_config(out.path());
    cfg.llm.record = Some(cassette.clone());
    let flaky = |req: &LlmRequest<'_>| -> Result<String, LlmError> {
        if req.page_no == 3 {
            Err(LlmError::Transport("connection reset".into()))
        } else {
            Ok(ScriptedBackend::respond(req.inputs, req.memory, req.page_no))
        }
    };
    let summary = run_pipeline_with(&cfg, Stages::ATTRIBUTE_ONLY, Some(Box::new(flaky))).unwrap();
    let recorded = fs::read_to_string(&cassette).unwrap().lines().count();
    assert_eq!(recorded, summary.titles[0].regions - 1);
    let preds = read_predictions(&fs::read_to_string(out.path().join("predictions.jsonl")).unwrap()).unwrap();
    assert!(preds.iter().any(|p| p.flags.iter().any(|f| f == "backend_error")));
}

#[test]
fn baselines_write_both_methods() {
    let out = tempfile::tempdir().unwrap();
    let summary = run_baselines(&fixture_config(out.path())).unwrap();
    assert_eq!(summary.reports.len(), 2);
    let frame = &summary.reports[1];
    assert_eq!(frame.method_tag, "rule_frame");
    assert!((frame.speaker.easy.percent - 100.0).abs() < 1e-9);
    assert!(summary.reports[0].speaker.total.percent <= frame.speaker.total.percent);
    for f in ["predictions-rule_short.jsonl", "report-rule_frame.json", "report-rule_short.csv", "run.json"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
}

fn echo_adapter() -> AdapterConfig {
    AdapterConfig { command: vec![ECHO.into()], timeout_secs: 10.0, ..Default::default() }
}

#[test]
fn adapter_channels_run_through_the_echo_adapter() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(out.path());
    cfg.llm.backend = LlmChoice::Scripted;
    cfg.perception.identity = IdentityChoice::Adapter;
    cfg.perception.ocr = OcrChoice::Adapter;
    cfg.perception.adapter = Some(echo_adapter());
    cfg.tts.mode = TtsMode::Adapter;
    cfg.tts.adapter = Some(echo_adapter());
    let summary = run_pipeline(&cfg, Stages::ALL).unwrap();
    assert_eq!(summary.exit_code(), 0, "{:?}", summary.titles);
    // Every instance is OTHERS, so nobody can be resolved to a main character.
    let preds = read_predictions(&fs::read_to_string(out.path().join("predictions.jsonl")).unwrap()).unwrap();
    assert!(preds.iter().all(|p| p.pred_speaker.character().is_none()));
    let manifest = fs::read_to_string(out.path().join("manifest.jsonl")).unwrap();
    for line in manifest.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["audio_path"].as_str().unwrap().starts_with("echo/"));
        assert_eq!(v["voice"], "narrator_jp_f1");
    }
}

#[test]
fn echo_adapter_conforms_on_random_requests() {
    let transport = ProcessTransport::spawn(&[ECHO.to_string()], Duration::from_secs(10)).unwrap();
    let client = AdapterClient::new(Box::new(transport));
    assert!(client.single_flight());
    let ops = [AdapterOp::Identify, AdapterOp::Intensity, AdapterOp::Ocr, AdapterOp::Synthesize];
    let mut rng = derive_rng(5, &["echo"]);
    let mut violations = 0;
    for i in 0..1000 {
        let n = rng.gen_range(0..12);
        let op = ops[rng.gen_range(0..ops.len())];
        let items = (0..n)
            .map(|k| {
                let mut item = AdapterItem::boxed(&format!("i{i}-{k}-{}", rng.gen::<u32>()), common::b(0, 0, 10, 10));
                if op == AdapterOp::Ocr || op == AdapterOp::Synthesize {
                    item.fields.insert("text".into(), serde_json::Value::String(format!("「{k}」")));
                }
                item
            })
            .collect();
        let req = AdapterRequest { op, title: FIXTURE_TITLE.into(), page: i, image: None, items };
        let resp = client.call(&req).unwrap();
        violations += check_conformance(&req, &resp).len();
        if op == AdapterOp::Ocr {
            for (a, b) in req.items.iter().zip(&resp.items) {
                assert_eq!(a.str_field("text"), b.str_field("text"));
            }
        }
    }
    assert_eq!(violations, 0);
}
