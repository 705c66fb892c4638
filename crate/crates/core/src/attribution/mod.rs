//! Per-page LLM attribution with a rolling plot memory.
//!
//! Each page (one region of a split spread) is rendered into a prompt that
//! carries the frames in reading order, the perception outputs, and the
//! summaries left by the previous page. The reply is parsed into one speaker
//! and one emotion per text. Pages of a title must be processed in order
//! because each reply rewrites the memory the next prompt reads.

mod backend;
mod memory;
mod prompt;
mod response;

use serde::{Deserialize, Serialize};

pub use backend::{
    prompt_hash, CassetteBackend, CassetteEntry, CassetteMode, LiveBackend, LiveConfig, LlmBackend, LlmError,
    LlmRequest, RecordingBackend, ScriptedBackend,
};
pub use memory::{truncate_chars, MemoryState, DEFAULT_GLOBAL_BUDGET, DEFAULT_LOCAL_BUDGET};
pub use prompt::{build_prompt, FrameBlock, PagePrompt, Roster, PROMPT_VERSION};
pub use response::{flags, normalize_emotion, parse_response, AttributionEntry, AttributionResult, ParseFailure};

use crate::annotation::Emotion;
use crate::baselines::{frame_distance, DistanceMetric, Identities};
use crate::layout::{FrameSequence, ReadingDirection, SceneGraph};
use crate::perception::{CharPrediction, EmotionIntensity};

#[derive(Debug, thiserror::Error)]
pub enum AttributionError {
    #[error("memory exceeds its budget: global {global}/{global_budget}, local {local}/{local_budget}")]
    Budget { global: usize, global_budget: usize, local: usize, local_budget: usize },
    #[error("memory is ready for page {expected} but page {got} was submitted")]
    CursorMismatch { expected: usize, got: usize },
    #[error("inputs disagree: {0}")]
    Inputs(String),
    #[error(transparent)]
    Backend(LlmError),
}

/// Everything the model sees about one page.
#[derive(Debug, Clone, Copy)]
pub struct PageInputs<'a> {
    pub scene: &'a SceneGraph,
    pub seq: &'a FrameSequence,
    /// One string per text, in scene order.
    pub ocr: &'a [String],
    /// One prediction per character instance, in scene order.
    pub char_preds: &'a [CharPrediction],
    /// Absent when intensity is not part of the setting.
    pub intensities: Option<&'a [EmotionIntensity]>,
    pub roster: &'a Roster,
    pub direction: ReadingDirection,
    /// Sequence number of this page within its title, starting at 0.
    pub page_no: usize,
}

impl PageInputs<'_> {
    fn validate(&self) -> Result<(), AttributionError> {
        let scene = self.scene;
        if self.ocr.len() != scene.n_text() {
            return Err(AttributionError::Inputs(format!(
                "{} OCR strings for {} texts",
                self.ocr.len(),
                scene.n_text()
            )));
        }
        let same_ids = self.char_preds.len() == scene.n_char()
            && self.char_preds.iter().zip(&scene.chars).all(|(p, c)| p.instance_id == c.id);
        if !same_ids {
            return Err(AttributionError::Inputs("identity predictions do not match the page's characters".into()));
        }
        if let Some(zs) = self.intensities {
            if zs.len() != scene.n_char() || zs.iter().zip(&scene.chars).any(|(z, c)| z.instance_id != c.id) {
                return Err(AttributionError::Inputs("intensity scores do not match the page's characters".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Extra attempts after an unparseable reply.
    pub max_retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Parsed,
    ParseFailure,
    BackendError,
}

#[derive(Debug, Clone)]
pub struct PageAttribution {
    pub result: AttributionResult,
    pub memory: MemoryState,
    pub prompt: PagePrompt,
    pub calls: u32,
    pub outcome: Outcome,
}

/// Frame-distance speakers, neutral emotions, memory left as it was.
fn fallback(inputs: &PageInputs<'_>, order: &[String], reason: &str, memory: &MemoryState) -> AttributionResult {
    let identities: Identities = inputs
        .char_preds
        .iter()
        .map(|p| (p.instance_id.clone(), p.predicted.clone()))
        .collect();
    let preds = frame_distance(inputs.scene, inputs.seq, &identities, DistanceMetric::Center);
    let entries = order
        .iter()
        .map(|id| AttributionEntry {
            text_id: id.clone(),
            speaker: preds
                .iter()
                .find(|p| &p.text_id == id)
                .map(|p| p.speaker.clone())
                .unwrap_or(crate::labels::Speaker::Unknown),
            emotion: Emotion::Neutral,
            flags: vec![reason.to_string(), flags::FALLBACK.to_string()],
        })
        .collect();
    AttributionResult {
        entries,
        new_global_summary: memory.global_summary.clone(),
        new_local_summary: memory.local_summary.clone(),
    }
}

/// Attributes one page and returns the memory for the next one.
pub fn attribute_page(
    inputs: &PageInputs<'_>,
    memory: &MemoryState,
    backend: &dyn LlmBackend,
    retry: RetryPolicy,
) -> Result<PageAttribution, AttributionError> {
    let expected = memory.next_page();
    if inputs.page_no != expected {
        return Err(AttributionError::CursorMismatch { expected, got: inputs.page_no });
    }
    inputs.validate()?;
    let prompt = build_prompt(inputs, memory)?;
    let rendered = prompt.render();
    let request = LlmRequest {
        title: &inputs.scene.title_id,
        page: inputs.scene.page_index,
        page_no: inputs.page_no,
        prompt: &rendered,
        inputs,
        memory,
    };

    let mut calls = 0;
    let mut last_failure = None;
    while calls <= retry.max_retries {
        calls += 1;
        match backend.complete(&request) {
            Ok(raw) => match parse_response(&raw, &prompt.text_order, inputs.roster) {
                Ok(result) => {
                    let next = memory.advanced(inputs.page_no, &result.new_global_summary, &result.new_local_summary);
                    let result = AttributionResult {
                        new_global_summary: next.global_summary.clone(),
                        new_local_summary: next.local_summary.clone(),
                        ..result
                    };
                    return Ok(PageAttribution { result, memory: next, prompt, calls, outcome: Outcome::Parsed });
                }
                Err(e) => {
                    log::debug!("{} page {}: {e}", inputs.scene.key(), inputs.page_no);
                    last_failure = Some(e);
                }
            },
            Err(LlmError::Transport(e)) => {
                log::warn!("{}: {e}; using frame-distance fallback", inputs.scene.key());
                let result = fallback(inputs, &prompt.text_order, flags::BACKEND_ERROR, memory);
                return Ok(PageAttribution {
                    result,
                    memory: memory.skipped(inputs.page_no),
                    prompt,
                    calls,
                    outcome: Outcome::BackendError,
                });
            }
            Err(fatal) => return Err(AttributionError::Backend(fatal)),
        }
    }
    if let Some(e) = last_failure {
        log::warn!("{}: {e} after {calls} attempts; using frame-distance fallback", inputs.scene.key());
    }
    let result = fallback(inputs, &prompt.text_order, flags::PARSE_FAILURE, memory);
    Ok(PageAttribution {
        result,
        memory: memory.skipped(inputs.page_no),
        prompt,
        calls,
        outcome: Outcome::ParseFailure,
    })
}
