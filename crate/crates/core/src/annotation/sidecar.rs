use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{IngestError, TitleCorpus};

/// One line of the speaker-link sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerLinkLine {
    pub title: String,
    pub text_id: String,
    pub speaker_id: String,
}

/// One line of the emotion-label sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionLabelLine {
    pub title: String,
    pub face_id: String,
    pub label: String,
}

pub(crate) fn parse_lines<T: DeserializeOwned>(src: &str, path: &str) -> Result<Vec<T>, IngestError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| IngestError::Sidecar {
                path: path.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn to_lines<T: Serialize>(items: impl Iterator<Item = T>) -> String {
    items
        .map(|item| serde_json::to_string(&item).expect("plain record serializes") + "\n")
        .collect()
}

pub(crate) fn speaker_lines(corpus: &TitleCorpus) -> String {
    to_lines(corpus.speaker_links.iter().map(|l| SpeakerLinkLine {
        title: l.title_id.clone(),
        text_id: l.text_element_id.clone(),
        speaker_id: l.speaker_character_id.clone(),
    }))
}

pub(crate) fn emotion_lines(corpus: &TitleCorpus) -> String {
    to_lines(corpus.pages.iter().flat_map(|p| &p.faces).filter_map(|f| {
        f.emotion.map(|e| EmotionLabelLine {
            title: corpus.title_id.clone(),
            face_id: f.id.clone(),
            label: e.as_str().to_string(),
        })
    }))
}
