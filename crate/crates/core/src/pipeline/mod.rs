//! Stage orchestration: ingest, layout, perception, attribution, evaluation
//! and voice planning, with one output file per stage.
//!
//! Titles run in parallel up to the configured worker count. Pages inside a
//! title run strictly in order. Outputs are written after all titles finish,
//! in title order, so the worker count never changes a byte.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    AdapterConfig, CorpusConfig, IdentityChoice, IntensityChoice, LayoutSection, LlmChoice, LlmConfig, OcrChoice,
    PerceptionConfig, RunConfig, Setting, TtsConfig, TtsMode,
};

use crate::annotation::{
    build_linked_set, parse_title, read_corpus_jsonl, select_test_titles, write_corpus_jsonl, ElementId, LinkedSample,
    TitleCorpus,
};
use crate::attribution::{
    attribute_page, prompt_hash, CassetteBackend, LiveBackend, LlmBackend, MemoryState, Outcome, PageInputs,
    RecordingBackend, Roster, ScriptedBackend, PROMPT_VERSION,
};
use crate::baselines::{frame_distance, short_distance, DistanceMetric, Identities, SpeakerPrediction};
use crate::error::ArgumentError;
use crate::evaluation::{
    evaluate, evaluation_set, render_report, sample_key, EvalReport, PredictionRecord, ReportFormat, SampleKey,
};
use crate::labels::{Identity, Method};
use crate::layout::{analyze, classify_case, split_spread, CaseDifficulty, FrameSequence, RegionLayout, SceneGraph};
use crate::perception::adapter::{AdapterClient, HttpTransport, ProcessTransport, Transport};
use crate::perception::{
    build_registry, crop_pool, estimate_intensity, identify_characters, ocr_text, AdapterBackend, CharPrediction,
    CharacterRegistry, CropRef, EmotionIntensity, IdentityBackend, IntensityBackend, MiscalibratedIntensity,
    NoisyIdentity, OcrBackend, OracleIdentity, OracleIntensity, OracleOcr, RegistryError, RegistryParams,
};
use crate::tts::{dispatch, manifest_jsonl, plan_jobs, ManifestLine, ProfileBook, Synthesizer, Utterance, VoiceProfile};

pub const PERCEPTION_SCHEMA: &str = "perception_v1";
pub const PROMPT_SCHEMA: &str = "prompt_v1";
pub const RUN_SCHEMA: &str = "run_v1";

/// Every title found under the configured corpus source, sorted by title id.
pub fn load_corpus(cfg: &CorpusConfig) -> anyhow::Result<Vec<TitleCorpus>> {
    let mut titles = if let Some(dump) = &cfg.dump {
        let src = std::fs::read_to_string(dump).with_context(|| format!("reading corpus dump {}", dump.display()))?;
        read_corpus_jsonl(&src)?
    } else {
        let dir = cfg
            .annotations
            .as_ref()
            .ok_or_else(|| ArgumentError("corpus needs either `annotations` or `dump`".into()))?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading annotation directory {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "xml"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| {
                parse_title(f, cfg.speaker_links.as_deref(), cfg.emotion_labels.as_deref())
                    .with_context(|| format!("ingesting {}", f.display()))
            })
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    anyhow::ensure!(!titles.is_empty(), "the corpus contains no titles");
    titles.sort_by(|a, b| a.title_id.cmp(&b.title_id));
    Ok(titles)
}

/// Applies the title filter or the test-title selection.
pub fn select_titles(all: &[TitleCorpus], cfg: &CorpusConfig) -> Result<Vec<TitleCorpus>, ArgumentError> {
    if !cfg.titles.is_empty() {
        let missing: Vec<&String> = cfg.titles.iter().filter(|t| !all.iter().any(|c| &c.title_id == *t)).collect();
        if !missing.is_empty() {
            return Err(ArgumentError(format!("titles not in corpus: {missing:?}")));
        }
        return Ok(all.iter().filter(|c| cfg.titles.contains(&c.title_id)).cloned().collect());
    }
    match cfg.test_titles {
        Some(n) => {
            let chosen = select_test_titles(all, n)?;
            Ok(all.iter().filter(|c| chosen.contains(&c.title_id)).cloned().collect())
        }
        None => Ok(all.to_vec()),
    }
}

/// The title restricted to its first `limit` page images.
pub fn limit_pages(corpus: &TitleCorpus, limit: Option<usize>) -> TitleCorpus {
    let mut out = corpus.clone();
    if let Some(n) = limit {
        out.pages.truncate(n);
        let kept: std::collections::BTreeSet<&str> =
            out.pages.iter().flat_map(|p| &p.texts).map(|t| t.id.as_str()).collect();
        let links = out.speaker_links.iter().filter(|l| kept.contains(l.text_element_id.as_str())).cloned().collect();
        out.speaker_links = links;
    }
    out
}

/// Reading regions of a title with their frame sequences, in reading order.
#[derive(Debug, Clone)]
pub struct TitleLayout {
    pub scenes: Vec<SceneGraph>,
    pub seqs: Vec<FrameSequence>,
}

impl TitleLayout {
    pub fn regions(&self) -> BTreeMap<u32, Vec<RegionLayout>> {
        let mut out: BTreeMap<u32, Vec<RegionLayout>> = BTreeMap::new();
        for (scene, seq) in self.scenes.iter().zip(&self.seqs) {
            out.entry(scene.page_index)
                .or_default()
                .push(RegionLayout { region: scene.region, frame_sequence: seq.clone() });
        }
        out
    }

    fn locate(&self, text_id: &str) -> Option<(&SceneGraph, &FrameSequence)> {
        self.scenes.iter().zip(&self.seqs).find(|(s, _)| s.text(text_id).is_some())
    }
}

pub fn layout_title(corpus: &TitleCorpus, section: &LayoutSection) -> TitleLayout {
    let scenes: Vec<SceneGraph> = corpus
        .pages
        .iter()
        .flat_map(|p| split_spread(p, section.split, section.config.reading_direction))
        .collect();
    let seqs = scenes.iter().map(|s| analyze(s, &section.config)).collect();
    TitleLayout { scenes, seqs }
}

pub type Difficulties = BTreeMap<SampleKey, CaseDifficulty>;

/// Evaluation samples of a (page-limited) title and their difficulty.
pub fn gold_for(corpus: &TitleCorpus, layout: &TitleLayout) -> (Vec<LinkedSample>, Difficulties) {
    let gold = evaluation_set(&build_linked_set(corpus));
    let mut diffs = Difficulties::new();
    for s in &gold {
        if let Some((scene, seq)) = layout.locate(&s.text_element_id) {
            if let Ok(d) = classify_case(&s.text_element_id, &s.gt_speaker, scene, seq) {
                diffs.insert(sample_key(s), d);
            }
        }
    }
    (gold, diffs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleStatus {
    pub title: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub regions: usize,
    pub texts: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub titles: Vec<TitleStatus>,
    #[serde(skip)]
    pub reports: Vec<EvalReport>,
}

impl RunSummary {
    pub fn aborted(&self) -> usize {
        self.titles.iter().filter(|t| !t.ok).count()
    }

    /// Nonzero when any title aborted.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.aborted() > 0)
    }
}

/// Which stages after attribution to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub evaluate: bool,
    pub tts: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { evaluate: true, tts: true };
    pub const ATTRIBUTE_ONLY: Stages = Stages { evaluate: false, tts: false };
}

fn adapter_client(cfg: &AdapterConfig) -> anyhow::Result<AdapterClient> {
    let transport: Box<dyn Transport> = if cfg.command.is_empty() {
        let url = cfg.url.clone().ok_or_else(|| ArgumentError("adapter needs `command` or `url`".into()))?;
        Box::new(HttpTransport::new(url, cfg.timeout()))
    } else {
        Box::new(
            ProcessTransport::spawn(&cfg.command, cfg.timeout())
                .with_context(|| format!("starting adapter {:?}", cfg.command))?,
        )
    };
    let client = AdapterClient::new(transport);
    Ok(match &cfg.image_root {
        Some(root) => client.with_image_root(root),
        None => client,
    })
}

enum LlmHandle {
    Plain(Box<dyn LlmBackend>),
    Recording(RecordingBackend),
}

impl LlmHandle {
    fn backend(&self) -> &dyn LlmBackend {
        match self {
            LlmHandle::Plain(b) => b.as_ref(),
            LlmHandle::Recording(r) => r,
        }
    }
}

fn llm_backend(cfg: &LlmConfig, custom: Option<Box<dyn LlmBackend>>) -> anyhow::Result<LlmHandle> {
    let inner: Box<dyn LlmBackend> = match (custom, cfg.backend) {
        (Some(b), _) => b,
        (None, LlmChoice::Scripted) => Box::new(ScriptedBackend),
        (None, LlmChoice::Cassette) => {
            let path = cfg.cassette.as_ref().ok_or_else(|| ArgumentError("llm.cassette is not set".into()))?;
            Box::new(
                CassetteBackend::load(path, cfg.cassette_mode)
                    .with_context(|| format!("loading cassette {}", path.display()))?,
            )
        }
        (None, LlmChoice::Live) => Box::new(LiveBackend::new(cfg.live.clone())?),
    };
    Ok(match cfg.record {
        Some(_) => LlmHandle::Recording(RecordingBackend::boxed(inner)),
        None => LlmHandle::Plain(inner),
    })
}

/// A single narrator voice used when no profile book is configured.
pub fn default_profiles() -> ProfileBook {
    ProfileBook {
        narrator: Some(VoiceProfile {
            reference_voice_id: "narrator".into(),
            styles: BTreeMap::new(),
            default_style: "neutral".into(),
        }),
        characters: BTreeMap::new(),
    }
}

fn load_profiles(cfg: &TtsConfig) -> anyhow::Result<ProfileBook> {
    match &cfg.profiles {
        Some(p) => {
            let src = std::fs::read_to_string(p).with_context(|| format!("reading voice profiles {}", p.display()))?;
            Ok(ProfileBook::from_toml(&src)?)
        }
        None => Ok(default_profiles()),
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    stages: Stages,
    pool: Vec<CropRef>,
    adapter: Option<Arc<AdapterClient>>,
    llm: LlmHandle,
    book: ProfileBook,
    tts_client: Option<AdapterClient>,
}

#[derive(Serialize)]
struct PerceptionRecord<'a> {
    schema: &'static str,
    title: &'a str,
    page: u32,
    region: usize,
    ocr: &'a [String],
    identities: &'a [CharPrediction],
    #[serde(skip_serializing_if = "Option::is_none")]
    intensities: Option<&'a [EmotionIntensity]>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct PromptRecord<'a> {
    schema: &'static str,
    title: &'a str,
    page: u32,
    region: usize,
    page_no: usize,
    prompt_version: &'static str,
    prompt_hash: String,
    outcome: Outcome,
    calls: u32,
    prompt: String,
}

#[derive(Default)]
struct TitleOutput {
    corpus: String,
    perception: String,
    prompts: String,
    predictions: Vec<PredictionRecord>,
    gold: Vec<LinkedSample>,
    difficulties: Difficulties,
    manifest: Vec<ManifestLine>,
    regions: usize,
    texts: usize,
}

fn jsonl<T: Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("record serializes"));
    out.push('\n');
}

fn registry_for(full: &TitleCorpus, ctx: &Context<'_>) -> CharacterRegistry {
    let p = &ctx.cfg.perception;
    let params = RegistryParams { min_appearances: p.min_appearances, n_ref: p.n_ref, seed: ctx.cfg.seed };
    match build_registry(full, &ctx.pool, params) {
        Ok(build) => {
            for w in &build.warnings {
                log::info!("{}: {w:?}", full.title_id);
            }
            build.registry
        }
        Err(RegistryError::NoMainCharacters { registry }) => {
            log::warn!("{}: no main characters; every instance is OTHERS", full.title_id);
            registry
        }
    }
}

fn run_title(full: &TitleCorpus, ctx: &Context<'_>) -> anyhow::Result<TitleOutput> {
    let cfg = ctx.cfg;
    let title = full.title_id.as_str();
    let registry = registry_for(full, ctx);
    let corpus = limit_pages(full, cfg.corpus.pages_limit);
    let layout = layout_title(&corpus, &cfg.layout);
    let roster = Roster::new(registry.main_characters.iter().map(|id| {
        let name = corpus.character(id).map_or_else(|| id.clone(), |c| c.name.clone());
        (id.clone(), name)
    }));

    let adapter = || -> anyhow::Result<AdapterBackend> {
        let client = ctx.adapter.clone().ok_or_else(|| ArgumentError("no adapter configured".into()))?;
        Ok(AdapterBackend { client, registry: registry.clone() })
    };
    let p = &cfg.perception;
    let identity: Box<dyn IdentityBackend> = match p.identity {
        IdentityChoice::Oracle => Box::new(OracleIdentity { registry: registry.clone() }),
        IdentityChoice::Noisy => {
            Box::new(NoisyIdentity { registry: registry.clone(), epsilon: p.epsilon, seed: cfg.seed })
        }
        IdentityChoice::Adapter => Box::new(adapter()?),
    };
    let intensity: Option<Box<dyn IntensityBackend>> = match (cfg.uses_intensity(), p.intensity) {
        (false, _) => None,
        (true, IntensityChoice::Oracle) => Some(Box::new(OracleIntensity::default())),
        (true, IntensityChoice::Miscalibrated) => Some(Box::new(MiscalibratedIntensity::new(cfg.seed))),
        (true, IntensityChoice::Adapter) => Some(Box::new(adapter()?)),
    };
    let ocr: Box<dyn OcrBackend> = match p.ocr {
        OcrChoice::Oracle => Box::new(OracleOcr),
        OcrChoice::Adapter => Box::new(adapter()?),
    };

    let mut out = TitleOutput { corpus: write_corpus_jsonl(&corpus, Some(&layout.regions())), ..Default::default() };
    let mut utterances = Vec::new();
    let mut memory = MemoryState::new(cfg.llm.global_budget, cfg.llm.local_budget);
    for (page_no, (scene, seq)) in layout.scenes.iter().zip(&layout.seqs).enumerate() {
        let texts = ocr_text(scene, ocr.as_ref()).with_context(|| format!("OCR on {}", scene.key()))?;
        let ids = identify_characters(scene, identity.as_ref());
        let zs = intensity.as_ref().map(|b| estimate_intensity(scene, b.as_ref()));
        jsonl(
            &mut out.perception,
            &PerceptionRecord {
                schema: PERCEPTION_SCHEMA,
                title,
                page: scene.page_index,
                region: scene.region,
                ocr: &texts.texts,
                identities: &ids,
                intensities: zs.as_deref(),
                warnings: texts.warnings.clone(),
            },
        );
        let inputs = PageInputs {
            scene,
            seq,
            ocr: &texts.texts,
            char_preds: &ids,
            intensities: zs.as_deref(),
            roster: &roster,
            direction: cfg.layout.config.reading_direction,
            page_no,
        };
        let att = attribute_page(&inputs, &memory, ctx.llm.backend(), cfg.retry_policy())
            .with_context(|| format!("attributing {}", scene.key()))?;
        let rendered = att.prompt.render();
        jsonl(
            &mut out.prompts,
            &PromptRecord {
                schema: PROMPT_SCHEMA,
                title,
                page: scene.page_index,
                region: scene.region,
                page_no,
                prompt_version: PROMPT_VERSION,
                prompt_hash: prompt_hash(&rendered),
                outcome: att.outcome,
                calls: att.calls,
                prompt: rendered,
            },
        );
        for e in &att.result.entries {
            let text = scene
                .texts
                .iter()
                .position(|t| t.id == e.text_id)
                .map(|i| texts.texts[i].clone())
                .unwrap_or_default();
            out.predictions.push(PredictionRecord {
                title: title.to_string(),
                page: scene.page_index,
                text_id: e.text_id.clone(),
                pred_speaker: e.speaker.clone(),
                pred_emotion: Some(e.emotion),
                method: Method::Llm,
                flags: e.flags.clone(),
            });
            utterances.push(Utterance {
                page: scene.page_index,
                text_id: e.text_id.clone(),
                text,
                speaker: e.speaker.clone(),
                emotion: e.emotion,
            });
        }
        memory = att.memory;
        out.texts += scene.n_text();
    }
    out.regions = layout.scenes.len();

    if ctx.stages.evaluate {
        (out.gold, out.difficulties) = gold_for(&corpus, &layout);
    }
    if ctx.stages.tts {
        let jobs = plan_jobs(title, &utterances, &ctx.book)?;
        let synth = match &ctx.tts_client {
            Some(client) => Synthesizer::Adapter { client, max_concurrent: cfg.tts.max_concurrent },
            None => Synthesizer::ManifestOnly,
        };
        out.manifest = dispatch(&jobs, &synth);
    }
    Ok(out)
}

fn worker_pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn predictions_jsonl(preds: &[PredictionRecord]) -> String {
    let mut s = String::new();
    for p in preds {
        jsonl(&mut s, p);
    }
    s
}

pub fn read_predictions(src: &str) -> anyhow::Result<Vec<PredictionRecord>> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("predictions line {}", i + 1)))
        .collect()
}

fn write_report(dir: &Path, stem: &str, report: &EvalReport) -> anyhow::Result<()> {
    write_file(dir, &format!("{stem}.json"), &render_report(report, ReportFormat::Json)?)?;
    write_file(dir, &format!("{stem}.txt"), &render_report(report, ReportFormat::TextTable)?)?;
    write_file(dir, &format!("{stem}.csv"), &render_report(report, ReportFormat::Csv)?)?;
    if report.confusion.is_some() {
        write_file(dir, &format!("{stem}_confusion.png"), &render_report(report, ReportFormat::ConfusionPng)?)?;
    }
    Ok(())
}

fn prepare(cfg: &RunConfig) -> anyhow::Result<(Vec<TitleCorpus>, Vec<TitleCorpus>)> {
    cfg.validate()?;
    let all = load_corpus(&cfg.corpus)?;
    let selected = select_titles(&all, &cfg.corpus)?;
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
    write_file(&cfg.output_dir, "config.toml", cfg.to_toml().as_bytes())?;
    Ok((all, selected))
}

fn status(title: &str, result: &anyhow::Result<TitleOutput>) -> TitleStatus {
    match result {
        Ok(o) => TitleStatus { title: title.into(), ok: true, error: None, regions: o.regions, texts: o.texts },
        Err(e) => {
            log::error!("{title} aborted: {e:#}");
            TitleStatus { title: title.into(), ok: false, error: Some(format!("{e:#}")), regions: 0, texts: 0 }
        }
    }
}

fn llm_tag(setting: Setting) -> String {
    format!("llm-{setting:?}")
}

/// The full pipeline, or a prefix of it.
pub fn run_pipeline(cfg: &RunConfig, stages: Stages) -> anyhow::Result<RunSummary> {
    run_pipeline_with(cfg, stages, None)
}

/// Like [`run_pipeline`], with `backend` replacing the configured language model.
/// Recording still applies when `llm.record` is set.
pub fn run_pipeline_with(
    cfg: &RunConfig,
    stages: Stages,
    backend: Option<Box<dyn LlmBackend>>,
) -> anyhow::Result<RunSummary> {
    let (all, selected) = prepare(cfg)?;
    let adapter = match &cfg.perception.adapter {
        Some(a) if cfg.perception.identity == IdentityChoice::Adapter
            || cfg.perception.ocr == OcrChoice::Adapter
            || (cfg.uses_intensity() && cfg.perception.intensity == IntensityChoice::Adapter) =>
        {
            Some(Arc::new(adapter_client(a)?))
        }
        _ => None,
    };
    let tts_client = match (&cfg.tts.mode, &cfg.tts.adapter, stages.tts) {
        (TtsMode::Adapter, Some(a), true) => Some(adapter_client(a)?),
        _ => None,
    };
    let ctx = Context {
        cfg,
        stages,
        pool: crop_pool(&all),
        adapter,
        llm: llm_backend(&cfg.llm, backend)?,
        book: load_profiles(&cfg.tts)?,
        tts_client,
    };
    let results: Vec<anyhow::Result<TitleOutput>> =
        worker_pool(cfg.workers)?.install(|| selected.par_iter().map(|t| run_title(t, &ctx)).collect());

    let dir = &cfg.output_dir;
    let mut summary = RunSummary { schema: RUN_SCHEMA.into(), titles: Vec::new(), reports: Vec::new() };
    let (mut corpus, mut perception, mut prompts) = (String::new(), String::new(), String::new());
    let (mut preds, mut gold, mut diffs, mut manifest) = (Vec::new(), Vec::new(), Difficulties::new(), Vec::new());
    for (t, r) in selected.iter().zip(results) {
        summary.titles.push(status(&t.title_id, &r));
        if let Ok(o) = r {
            corpus.push_str(&o.corpus);
            perception.push_str(&o.perception);
            prompts.push_str(&o.prompts);
            preds.extend(o.predictions);
            gold.extend(o.gold);
            diffs.extend(o.difficulties);
            manifest.extend(o.manifest);
        }
    }
    write_file(dir, "corpus.jsonl", corpus.as_bytes())?;
    write_file(dir, "perception.jsonl", perception.as_bytes())?;
    write_file(dir, "prompts.jsonl", prompts.as_bytes())?;
    write_file(dir, "predictions.jsonl", predictions_jsonl(&preds).as_bytes())?;
    if stages.evaluate {
        let report = evaluate(&llm_tag(cfg.setting), &preds, &gold, &diffs)?;
        write_report(dir, "report", &report)?;
        summary.reports.push(report);
    }
    if stages.tts {
        write_file(dir, "manifest.jsonl", manifest_jsonl(&manifest).as_bytes())?;
    }
    if let (Some(path), LlmHandle::Recording(rec)) = (&cfg.llm.record, &ctx.llm) {
        std::fs::write(path, rec.to_jsonl()).with_context(|| format!("writing cassette {}", path.display()))?;
    }
    write_file(dir, "run.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(summary)
}

fn gold_identities(scene: &SceneGraph) -> Identities {
    scene.chars.iter().map(|c| (c.id.clone(), Identity::Character(c.character.clone()))).collect()
}

fn baseline_records(title: &str, scene: &SceneGraph, preds: Vec<SpeakerPrediction>) -> Vec<PredictionRecord> {
    preds
        .into_iter()
        .map(|p| PredictionRecord {
            title: title.to_string(),
            page: scene.page_index,
            flags: if p.instance.is_none() { vec!["abstain".to_string()] } else { Vec::new() },
            text_id: p.text_id,
            pred_speaker: p.speaker,
            pred_emotion: None,
            method: p.method,
        })
        .collect()
}

struct BaselineOutput {
    short: Vec<PredictionRecord>,
    frame: Vec<PredictionRecord>,
    gold: Vec<LinkedSample>,
    difficulties: Difficulties,
    regions: usize,
    texts: usize,
}

/// Both rule baselines with gold character identities.
pub fn run_baselines(cfg: &RunConfig) -> anyhow::Result<RunSummary> {
    let (_, selected) = prepare(cfg)?;
    let run = |full: &TitleCorpus| -> BaselineOutput {
        let corpus = limit_pages(full, cfg.corpus.pages_limit);
        let layout = layout_title(&corpus, &cfg.layout);
        let (mut short, mut frame) = (Vec::new(), Vec::new());
        for (scene, seq) in layout.scenes.iter().zip(&layout.seqs) {
            let ids = gold_identities(scene);
            short.extend(baseline_records(&corpus.title_id, scene, short_distance(scene, &ids, DistanceMetric::Center)));
            frame.extend(baseline_records(
                &corpus.title_id,
                scene,
                frame_distance(scene, seq, &ids, DistanceMetric::Center),
            ));
        }
        let (gold, difficulties) = gold_for(&corpus, &layout);
        BaselineOutput {
            short,
            frame,
            gold,
            difficulties,
            regions: layout.scenes.len(),
            texts: layout.scenes.iter().map(SceneGraph::n_text).sum(),
        }
    };
    let results: Vec<BaselineOutput> = worker_pool(cfg.workers)?.install(|| selected.par_iter().map(run).collect());

    let mut summary = RunSummary { schema: RUN_SCHEMA.into(), titles: Vec::new(), reports: Vec::new() };
    let (mut short, mut frame, mut gold, mut diffs) = (Vec::new(), Vec::new(), Vec::new(), Difficulties::new());
    for (t, o) in selected.iter().zip(results) {
        summary.titles.push(TitleStatus { title: t.title_id.clone(), ok: true, error: None, regions: o.regions, texts: o.texts });
        short.extend(o.short);
        frame.extend(o.frame);
        gold.extend(o.gold);
        diffs.extend(o.difficulties);
    }
    let dir = &cfg.output_dir;
    for (method, preds) in [(Method::RuleShort, &short), (Method::RuleFrame, &frame)] {
        write_file(dir, &format!("predictions-{method}.jsonl"), predictions_jsonl(preds).as_bytes())?;
        let report = evaluate(method.tag(), preds, &gold, &diffs)?;
        write_report(dir, &format!("report-{method}"), &report)?;
        summary.reports.push(report);
    }
    write_file(dir, "run.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(summary)
}

/// Writes the selected, page-limited titles as a corpus dump, optionally with layouts.
pub fn run_ingest(cfg: &RunConfig, with_layout: bool) -> anyhow::Result<PathBuf> {
    let (_, selected) = prepare(cfg)?;
    let mut out = String::new();
    for full in &selected {
        let corpus = limit_pages(full, cfg.corpus.pages_limit);
        if with_layout {
            out.push_str(&write_corpus_jsonl(&corpus, Some(&layout_title(&corpus, &cfg.layout).regions())));
        } else {
            out.push_str(&write_corpus_jsonl(&corpus, None));
        }
    }
    let name = if with_layout { "layout.jsonl" } else { "corpus.jsonl" };
    write_file(&cfg.output_dir, name, out.as_bytes())?;
    Ok(cfg.output_dir.join(name))
}

/// Gold samples and difficulties for every selected title.
pub fn gold_for_config(cfg: &RunConfig) -> anyhow::Result<(Vec<LinkedSample>, Difficulties)> {
    let all = load_corpus(&cfg.corpus)?;
    let mut gold = Vec::new();
    let mut diffs = Difficulties::new();
    for full in select_titles(&all, &cfg.corpus)? {
        let corpus = limit_pages(&full, cfg.corpus.pages_limit);
        let (g, d) = gold_for(&corpus, &layout_title(&corpus, &cfg.layout));
        gold.extend(g);
        diffs.extend(d);
    }
    Ok((gold, diffs))
}

/// Scores an existing predictions file against the configured corpus.
pub fn evaluate_predictions(cfg: &RunConfig, preds: &[PredictionRecord]) -> anyhow::Result<EvalReport> {
    let (gold, diffs) = gold_for_config(cfg)?;
    let tag = match preds.first().map(|p| p.method) {
        Some(Method::Llm) => llm_tag(cfg.setting),
        Some(m) => m.tag().to_string(),
        None => "empty".to_string(),
    };
    Ok(evaluate(&tag, preds, &gold, &diffs)?)
}

/// Voice jobs for an existing predictions file; line text comes from the annotations.
pub fn plan_manifest(cfg: &RunConfig, preds: &[PredictionRecord]) -> anyhow::Result<Vec<ManifestLine>> {
    let all = load_corpus(&cfg.corpus)?;
    let book = load_profiles(&cfg.tts)?;
    let tts_client = match (&cfg.tts.mode, &cfg.tts.adapter) {
        (TtsMode::Adapter, Some(a)) => Some(adapter_client(a)?),
        _ => None,
    };
    let mut by_title: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for p in preds {
        if !by_title.contains_key(p.title.as_str()) {
            order.push(p.title.as_str());
        }
        by_title.entry(&p.title).or_default().push(p);
    }
    let mut lines = Vec::new();
    for title in order {
        let corpus = all
            .iter()
            .find(|c| c.title_id == title)
            .ok_or_else(|| ArgumentError(format!("predictions mention unknown title {title}")))?;
        let text_of = |id: &ElementId| -> String {
            corpus.pages.iter().find_map(|pg| pg.text(id)).map(|t| t.content.clone()).unwrap_or_default()
        };
        let utterances: Vec<Utterance> = by_title[title]
            .iter()
            .map(|p| Utterance {
                page: p.page,
                text_id: p.text_id.clone(),
                text: text_of(&p.text_id),
                speaker: p.pred_speaker.clone(),
                emotion: p.pred_emotion.unwrap_or(crate::annotation::Emotion::Neutral),
            })
            .collect();
        let jobs = plan_jobs(title, &utterances, &book)?;
        let synth = match &tts_client {
            Some(client) => Synthesizer::Adapter { client, max_concurrent: cfg.tts.max_concurrent },
            None => Synthesizer::ManifestOnly,
        };
        lines.extend(dispatch(&jobs, &synth));
    }
    Ok(lines)
}
