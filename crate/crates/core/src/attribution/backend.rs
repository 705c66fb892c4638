//! Completion backends: a live chat endpoint, recorded cassettes, and a
//! scripted heuristic that needs no model at all.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MemoryState, PageInputs};
use crate::baselines::{frame_distance, DistanceMetric, Identities};
use crate::labels::Speaker;

pub struct LlmRequest<'a> {
    pub title: &'a str,
    pub page: u32,
    /// Sequence number of the unit within its title.
    pub page_no: usize,
    pub prompt: &'a str,
    pub inputs: &'a PageInputs<'a>,
    pub memory: &'a MemoryState,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    /// Recoverable: the page falls back to the rule baseline.
    #[error("backend transport error: {0}")]
    Transport(String),
    /// Aborts the title.
    #[error("{0}")]
    Fatal(String),
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, LlmError>;
}

impl<F> LlmBackend for F
where
    F: Fn(&LlmRequest<'_>) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, LlmError> {
        self(request)
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Answers the way the frame-distance rule would, with surprise for any
/// speaker whose expression reads strong.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedBackend;

impl ScriptedBackend {
    pub fn respond(inputs: &PageInputs<'_>, memory: &MemoryState, page_no: usize) -> String {
        let identities: Identities = inputs
            .char_preds
            .iter()
            .map(|p| (p.instance_id.clone(), p.predicted.clone()))
            .collect();
        let preds = frame_distance(inputs.scene, inputs.seq, &identities, DistanceMetric::Center);
        let mut attributions = serde_json::Map::new();
        for p in &preds {
            let strong = p.instance.as_ref().is_some_and(|inst| {
                inputs
                    .intensities
                    .is_some_and(|zs| zs.iter().any(|z| &z.instance_id == inst && z.strong))
            });
            let speaker = match &p.speaker {
                Speaker::Known(id) => id.clone(),
                Speaker::Unknown => "unknown".to_string(),
            };
            attributions.insert(
                p.text_id.clone(),
                serde_json::json!({"speaker": speaker, "emotion": if strong { "surprise" } else { "neutral" }}),
            );
        }
        let line = format!("[{}] {} lines.", page_no, preds.len());
        let global = if memory.global_summary.is_empty() {
            line.clone()
        } else {
            format!("{} {line}", memory.global_summary)
        };
        serde_json::json!({
            "attributions": attributions,
            "global_summary": global,
            "local_summary": line,
        })
        .to_string()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, LlmError> {
        Ok(Self::respond(request.inputs, request.memory, request.page_no))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub title: String,
    pub page: u32,
    pub response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CassetteMode {
    /// A missing recording aborts the title.
    #[default]
    Strict,
    /// A missing recording is answered by the scripted backend.
    Lenient,
}

type CassetteKey = (String, u32, String);

/// Replays recorded responses keyed by title, page and prompt hash.
#[derive(Debug, Clone, Default)]
pub struct CassetteBackend {
    entries: BTreeMap<CassetteKey, String>,
    mode: CassetteMode,
}

impl CassetteBackend {
    pub fn new(entries: impl IntoIterator<Item = CassetteEntry>, mode: CassetteMode) -> Self {
        let entries = entries
            .into_iter()
            .map(|e| ((e.title, e.page, e.key), e.response))
            .collect();
        Self { entries, mode }
    }

    pub fn from_jsonl(src: &str, mode: CassetteMode) -> Result<Self, serde_json::Error> {
        let entries = src
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<CassetteEntry>)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(entries, mode))
    }

    pub fn load(path: &Path, mode: CassetteMode) -> anyhow::Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Ok(Self::from_jsonl(&src, mode)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl LlmBackend for CassetteBackend {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, LlmError> {
        let key = (request.title.to_string(), request.page, prompt_hash(request.prompt));
        match (self.entries.get(&key), self.mode) {
            (Some(resp), _) => Ok(resp.clone()),
            (None, CassetteMode::Lenient) => ScriptedBackend.complete(request),
            (None, CassetteMode::Strict) => Err(LlmError::Fatal(format!(
                "cassette miss for {} page {} prompt {}",
                key.0, key.1, key.2
            ))),
        }
    }
}

/// Passes calls through to another backend and keeps every successful exchange.
pub struct RecordingBackend {
    inner: Box<dyn LlmBackend>,
    tape: Mutex<Vec<CassetteEntry>>,
}

impl RecordingBackend {
    pub fn new(inner: impl LlmBackend + 'static) -> Self {
        Self::boxed(Box::new(inner))
    }

    pub fn boxed(inner: Box<dyn LlmBackend>) -> Self {
        Self { inner, tape: Mutex::new(Vec::new()) }
    }

    /// Recorded entries sorted by title, page and key, without duplicates.
    pub fn entries(&self) -> Vec<CassetteEntry> {
        let mut v = self.tape.lock().expect("tape lock").clone();
        v.sort_by(|a, b| (&a.title, a.page, &a.key).cmp(&(&b.title, b.page, &b.key)));
        v.dedup_by(|a, b| a.title == b.title && a.page == b.page && a.key == b.key);
        v
    }

    pub fn to_jsonl(&self) -> String {
        self.entries()
            .iter()
            .map(|e| serde_json::to_string(e).expect("entry serializes") + "\n")
            .collect()
    }
}

impl LlmBackend for RecordingBackend {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, LlmError> {
        let resp = self.inner.complete(request)?;
        self.tape.lock().expect("tape lock").push(CassetteEntry {
            key: prompt_hash(request.prompt),
            title: request.title.to_string(),
            page: request.page,
            response: resp.clone(),
        });
        Ok(resp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    /// OpenAI-compatible chat completions URL.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_concurrent: usize,
    /// Minimum spacing between request starts, in milliseconds.
    pub min_interval_ms: u64,
    pub temperature: f64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120.0,
            max_concurrent: 4,
            min_interval_ms: 0,
            temperature: 0.0,
        }
    }
}

struct Gate {
    in_flight: Mutex<(usize, Option<Instant>)>,
    freed: Condvar,
}

pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    agent: ureq::Agent,
    gate: Gate,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> anyhow::Result<Self> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| anyhow::anyhow!("environment variable {} is not set", config.api_key_env))?;
        anyhow::ensure!(config.max_concurrent > 0, "max_concurrent must be positive");
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .new_agent();
        Ok(Self {
            config,
            api_key,
            agent,
            gate: Gate { in_flight: Mutex::new((0, None)), freed: Condvar::new() },
        })
    }

    fn acquire(&self) {
        let mut state = self.gate.in_flight.lock().expect("gate lock");
        while state.0 >= self.config.max_concurrent {
            state = self.gate.freed.wait(state).expect("gate lock");
        }
        let spacing = Duration::from_millis(self.config.min_interval_ms);
        if let Some(last) = state.1 {
            let ready = last + spacing;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        state.0 += 1;
        state.1 = Some(Instant::now());
    }

    fn release(&self) {
        let mut state = self.gate.in_flight.lock().expect("gate lock");
        state.0 -= 1;
        self.gate.freed.notify_one();
    }

    fn post(&self, prompt: &str) -> Result<String, LlmError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .header("authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Transport("response has no message content".into()))
    }
}

impl LlmBackend for LiveBackend {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, LlmError> {
        self.acquire();
        let out = self.post(request.prompt);
        self.release();
        out
    }
}
