use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Roster;
use crate::annotation::{ElementId, Emotion};
use crate::labels::Speaker;

/// Per-text flags attached to attribution entries.
pub mod flags {
    pub const MISSING: &str = "missing";
    pub const UNKNOWN_EMOTION: &str = "emotion_out_of_vocabulary";
    pub const UNKNOWN_SPEAKER_NAME: &str = "speaker_not_in_roster";
    pub const PARSE_FAILURE: &str = "parse_failure";
    pub const BACKEND_ERROR: &str = "backend_error";
    pub const FALLBACK: &str = "fallback_frame_distance";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub text_id: ElementId,
    pub speaker: Speaker,
    pub emotion: Emotion,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionResult {
    /// In prompt text order.
    pub entries: Vec<AttributionEntry>,
    pub new_global_summary: String,
    pub new_local_summary: String,
}

impl AttributionResult {
    pub fn flag_count(&self) -> usize {
        self.entries.iter().map(|e| e.flags.len()).sum()
    }

    pub fn entry(&self, text_id: &str) -> Option<&AttributionEntry> {
        self.entries.iter().find(|e| e.text_id == text_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no well-formed attribution object in response: {0}")]
pub struct ParseFailure(pub String);

/// Maps free-form emotion words onto the closed label set.
pub fn normalize_emotion(raw: &str) -> Option<Emotion> {
    let word = raw.trim().to_lowercase();
    let label = match word.as_str() {
        "neutral" | "none" | "calm" | "normal" | "no emotion" => Emotion::Neutral,
        "surprise" | "surprised" | "surprising" | "shock" | "shocked" | "astonished" | "amazed" => {
            Emotion::Surprise
        }
        "anger" | "angry" | "angered" | "mad" | "furious" | "rage" | "annoyed" | "irritated" => Emotion::Anger,
        "happiness" | "happy" | "joy" | "joyful" | "glad" | "delighted" | "pleased" | "cheerful" => {
            Emotion::Happiness
        }
        "sadness" | "sad" | "unhappy" | "sorrow" | "sorrowful" | "upset" | "crying" => Emotion::Sadness,
        "disgust" | "disgusted" | "disgusting" | "revulsion" => Emotion::Disgust,
        "fear" | "afraid" | "scared" | "fearful" | "frightened" | "terrified" | "anxious" => Emotion::Fear,
        _ => return None,
    };
    Some(label)
}

/// Yields every balanced `{...}` span in `raw`, honoring JSON string quoting.
fn object_spans(raw: &str) -> Vec<&str> {
    let bytes = raw.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0;
    while let Some(off) = raw[start..].find('{') {
        let open = start + off;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        let mut close = None;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match (escaped, b) {
                    (true, _) => escaped = false,
                    (false, b'\\') => escaped = true,
                    (false, b'"') => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match close {
            Some(end) => {
                spans.push(&raw[open..=end]);
                start = open + 1;
            }
            None => break,
        }
    }
    spans
}

fn find_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    object_spans(raw).into_iter().find_map(|span| match serde_json::from_str::<Value>(span) {
        Ok(Value::Object(map)) if map.contains_key("attributions") => Some(map),
        _ => None,
    })
}

fn as_text(v: Option<&Value>) -> Option<&str> {
    v.and_then(Value::as_str)
}

/// Parses a model reply into one entry per expected text id.
pub fn parse_response(raw: &str, expected: &[ElementId], roster: &Roster) -> Result<AttributionResult, ParseFailure> {
    let obj = find_object(raw).ok_or_else(|| {
        let head: String = raw.chars().take(80).collect();
        ParseFailure(head)
    })?;

    let mut answers: BTreeMap<String, &serde_json::Map<String, Value>> = BTreeMap::new();
    match &obj["attributions"] {
        Value::Object(map) => {
            for (k, v) in map {
                if let Value::Object(inner) = v {
                    answers.insert(k.clone(), inner);
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                if let Value::Object(inner) = item {
                    if let Some(id) = as_text(inner.get("text_id")).or(as_text(inner.get("id"))) {
                        answers.entry(id.to_string()).or_insert(inner);
                    }
                }
            }
        }
        _ => return Err(ParseFailure("attributions is neither a map nor a list".into())),
    }

    let entries = expected
        .iter()
        .map(|id| {
            let mut flags = Vec::new();
            let Some(ans) = answers.get(id) else {
                flags.push(flags::MISSING.to_string());
                return AttributionEntry { text_id: id.clone(), speaker: Speaker::Unknown, emotion: Emotion::Neutral, flags };
            };
            let speaker = match as_text(ans.get("speaker")).map(str::trim) {
                None | Some("") => Speaker::Unknown,
                Some(s) if s.eq_ignore_ascii_case("unknown") || s.eq_ignore_ascii_case("unknown person") => {
                    Speaker::Unknown
                }
                Some(s) => match roster.resolve(s) {
                    Some(cid) => Speaker::Known(cid.clone()),
                    None => {
                        flags.push(flags::UNKNOWN_SPEAKER_NAME.to_string());
                        Speaker::Unknown
                    }
                },
            };
            let emotion = match as_text(ans.get("emotion")).map(normalize_emotion) {
                Some(Some(e)) => e,
                _ => {
                    flags.push(flags::UNKNOWN_EMOTION.to_string());
                    Emotion::Neutral
                }
            };
            AttributionEntry { text_id: id.clone(), speaker, emotion, flags }
        })
        .collect();

    Ok(AttributionResult {
        entries,
        new_global_summary: as_text(obj.get("global_summary")).unwrap_or_default().to_string(),
        new_local_summary: as_text(obj.get("local_summary")).unwrap_or_default().to_string(),
    })
}
