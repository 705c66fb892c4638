//! Voice jobs for attributed dialogue.
//!
//! Every text becomes one job voiced by its speaker's reference voice with a
//! style chosen from the predicted emotion. Speakers without a profile are
//! read by the narrator in its neutral style.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::annotation::{CharacterId, ElementId, Emotion};
use crate::labels::Speaker;
use crate::perception::adapter::{AdapterClient, AdapterItem, AdapterOp, AdapterRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceProfile {
    pub reference_voice_id: String,
    #[serde(default)]
    pub styles: BTreeMap<Emotion, String>,
    pub default_style: String,
}

impl VoiceProfile {
    pub fn style_for(&self, emotion: Emotion) -> &str {
        self.styles.get(&emotion).map_or(&self.default_style, String::as_str)
    }
}

/// Voice profiles per character plus the narrator used for everyone else.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProfileBook {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narrator: Option<VoiceProfile>,
    #[serde(default)]
    pub characters: BTreeMap<CharacterId, VoiceProfile>,
}

impl ProfileBook {
    pub fn from_toml(src: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(src)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no narrator profile configured, but {title}/{text_id} needs one (speaker {speaker})")]
pub struct MissingNarrator {
    pub title: String,
    pub text_id: ElementId,
    pub speaker: Speaker,
}

/// One attributed line, in reading order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub page: u32,
    pub text_id: ElementId,
    pub text: String,
    pub speaker: Speaker,
    pub emotion: Emotion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtsJob {
    pub job_id: String,
    pub title: String,
    pub page: u32,
    pub text_id: ElementId,
    pub text: String,
    pub speaker: Speaker,
    pub emotion: Emotion,
    pub voice: String,
    pub style: String,
    pub seq: usize,
}

/// Jobs for one title. `utterances` must already be in reading order: page
/// order, then frame order within each page.
pub fn plan_jobs(title: &str, utterances: &[Utterance], book: &ProfileBook) -> Result<Vec<TtsJob>, MissingNarrator> {
    utterances
        .iter()
        .enumerate()
        .map(|(seq, u)| {
            let own = u.speaker.character().and_then(|c| book.characters.get(c));
            let (profile, style) = match (own, &book.narrator) {
                (Some(p), _) => (p, p.style_for(u.emotion)),
                (None, Some(n)) => (n, n.style_for(Emotion::Neutral)),
                (None, None) => {
                    return Err(MissingNarrator {
                        title: title.to_string(),
                        text_id: u.text_id.clone(),
                        speaker: u.speaker.clone(),
                    })
                }
            };
            Ok(TtsJob {
                job_id: format!("{title}-{seq:05}"),
                title: title.to_string(),
                page: u.page,
                text_id: u.text_id.clone(),
                text: u.text.clone(),
                speaker: u.speaker.clone(),
                emotion: u.emotion,
                voice: profile.reference_voice_id.clone(),
                style: style.to_string(),
                seq,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestLine {
    #[serde(flatten)]
    pub job: TtsJob,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub enum Synthesizer<'a> {
    ManifestOnly,
    Adapter { client: &'a AdapterClient, max_concurrent: usize },
}

fn synthesize(client: &AdapterClient, job: &TtsJob) -> Result<String, String> {
    let mut fields = Map::new();
    for (k, v) in [("text", &job.text), ("voice", &job.voice), ("style", &job.style)] {
        fields.insert(k.into(), Value::String(v.clone()));
    }
    fields.insert("emotion".into(), Value::String(job.emotion.as_str().into()));
    fields.insert("speaker".into(), Value::String(job.speaker.to_string()));
    let request = AdapterRequest {
        op: AdapterOp::Synthesize,
        title: job.title.clone(),
        page: job.page,
        image: None,
        items: vec![AdapterItem { id: job.job_id.clone(), bbox: None, fields }],
    };
    let response = client.call(&request).map_err(|e| e.to_string())?;
    let item = &response.items[0];
    if let Some(err) = item.str_field("error") {
        return Err(err.to_string());
    }
    item.str_field("audio_path")
        .map(str::to_string)
        .ok_or_else(|| "adapter returned no audio_path".to_string())
}

/// Runs the jobs and returns one manifest line per job, in job order.
/// A failed job records its error and never stops the others.
pub fn dispatch(jobs: &[TtsJob], synth: &Synthesizer<'_>) -> Vec<ManifestLine> {
    match synth {
        Synthesizer::ManifestOnly => jobs
            .iter()
            .map(|job| ManifestLine { job: job.clone(), audio_path: None, error: None })
            .collect(),
        Synthesizer::Adapter { client, max_concurrent } => {
            let run = |job: &TtsJob| match synthesize(client, job) {
                Ok(path) => ManifestLine { job: job.clone(), audio_path: Some(path), error: None },
                Err(e) => {
                    log::warn!("synthesis failed for {}: {e}", job.job_id);
                    ManifestLine { job: job.clone(), audio_path: None, error: Some(e) }
                }
            };
            let threads = if client.single_flight() { 1 } else { (*max_concurrent).max(1) };
            if threads == 1 {
                return jobs.iter().map(run).collect();
            }
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
                Err(_) => jobs.iter().map(run).collect(),
            }
        }
    }
}

pub fn manifest_jsonl(lines: &[ManifestLine]) -> String {
    lines
        .iter()
        .map(|l| serde_json::to_string(l).expect("manifest line serializes") + "\n")
        .collect()
}
