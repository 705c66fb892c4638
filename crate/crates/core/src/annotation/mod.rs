//! Manga109-style annotation ingest.
//!
//! A title is read from its annotation XML plus two optional JSON-lines
//! sidecars (speaker links and face emotion labels). Dangling references are
//! dropped with a warning instead of failing the title.

mod dump;
mod linked;
mod sidecar;
mod xml;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

pub use dump::{read_corpus_jsonl, write_corpus_jsonl, PageRecord, TitleRecord, CORPUS_SCHEMA, PAGE_SCHEMA};
pub use linked::{build_linked_set, select_test_titles, LinkedSample};
pub use sidecar::{EmotionLabelLine, SpeakerLinkLine};
pub use xml::{parse_xml, write_xml};

pub type ElementId = String;
pub type CharacterId = String;

/// The seven face emotion categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Surprise,
    Anger,
    Happiness,
    Sadness,
    Disgust,
    Fear,
}

impl Emotion {
    pub const ALL: [Emotion; 7] = [
        Emotion::Neutral,
        Emotion::Surprise,
        Emotion::Anger,
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Disgust,
        Emotion::Fear,
    ];

    /// Classes that carry enough support to be scored; disgust and fear are not.
    pub const EVALUATED: [Emotion; 5] = [
        Emotion::Neutral,
        Emotion::Surprise,
        Emotion::Anger,
        Emotion::Happiness,
        Emotion::Sadness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Surprise => "surprise",
            Emotion::Anger => "anger",
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
        }
    }

    pub fn is_evaluated(self) -> bool {
        !matches!(self, Emotion::Disgust | Emotion::Fear)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown emotion label {0:?}")]
pub struct UnknownEmotion(pub String);

impl FromStr for Emotion {
    type Err = UnknownEmotion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| UnknownEmotion(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub id: CharacterId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub id: ElementId,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRegion {
    pub id: ElementId,
    pub bbox: BBox,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Body {
    pub id: ElementId,
    pub bbox: BBox,
    pub character: CharacterId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub id: ElementId,
    pub bbox: BBox,
    pub character: CharacterId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<Emotion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageAnnotation {
    pub title_id: String,
    pub page_index: u32,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<Frame>,
    pub texts: Vec<TextRegion>,
    pub bodies: Vec<Body>,
    pub faces: Vec<Face>,
}

impl PageAnnotation {
    pub fn text(&self, id: &str) -> Option<&TextRegion> {
        self.texts.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerLink {
    pub title_id: String,
    pub text_element_id: ElementId,
    pub speaker_character_id: CharacterId,
}

/// Non-fatal ingest problems. The offending record is dropped or repaired.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestWarning {
    UnknownCharacter { element_id: ElementId, character_id: CharacterId },
    DegenerateBox { element_id: ElementId },
    BoxClamped { element_id: ElementId },
    DanglingSpeakerLink { text_id: ElementId, speaker_id: CharacterId },
    DanglingEmotionLabel { face_id: ElementId },
    UnknownEmotionLabel { face_id: ElementId, label: String },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestWarning::UnknownCharacter { element_id, character_id } => {
                write!(f, "{element_id}: character {character_id} not in roster, dropped")
            }
            IngestWarning::DegenerateBox { element_id } => write!(f, "{element_id}: empty box, dropped"),
            IngestWarning::BoxClamped { element_id } => write!(f, "{element_id}: box clamped to page"),
            IngestWarning::DanglingSpeakerLink { text_id, speaker_id } => {
                write!(f, "speaker link {text_id} -> {speaker_id} is dangling, dropped")
            }
            IngestWarning::DanglingEmotionLabel { face_id } => {
                write!(f, "emotion label for unknown face {face_id}, dropped")
            }
            IngestWarning::UnknownEmotionLabel { face_id, label } => {
                write!(f, "{face_id}: emotion label {label:?} not in vocabulary, dropped")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed XML: {message}")]
    Xml { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate element id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("{path}:{line}: bad JSON line: {message}")]
    Sidecar { path: String, line: usize, message: String },
}

/// Roster, ordered pages and speaker links of one title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleCorpus {
    pub title_id: String,
    pub characters: Vec<Character>,
    pub pages: Vec<PageAnnotation>,
    pub speaker_links: Vec<SpeakerLink>,
    #[serde(default)]
    pub warnings: Vec<IngestWarning>,
}

impl TitleCorpus {
    pub fn character(&self, id: &str) -> Option<&Character> {
        self.characters.iter().find(|c| c.id == id)
    }

    pub fn page(&self, index: u32) -> Option<&PageAnnotation> {
        self.pages.iter().find(|p| p.page_index == index)
    }

    /// Number of faces carrying an emotion label.
    pub fn emotion_annotation_count(&self) -> usize {
        self.pages
            .iter()
            .flat_map(|p| &p.faces)
            .filter(|f| f.emotion.is_some())
            .count()
    }

    /// (pages, frames, texts, bodies) totals.
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        let sum = |f: fn(&PageAnnotation) -> usize| self.pages.iter().map(f).sum::<usize>();
        (
            self.pages.len(),
            sum(|p| p.frames.len()),
            sum(|p| p.texts.len()),
            sum(|p| p.bodies.len()),
        )
    }

    /// Applies speaker links and emotion labels, dropping dangling entries with a warning.
    pub fn attach_sidecars(&mut self, links: Vec<SpeakerLinkLine>, labels: Vec<EmotionLabelLine>) {
        for line in labels.into_iter().filter(|l| l.title == self.title_id) {
            let Some(face) = self
                .pages
                .iter_mut()
                .flat_map(|p| p.faces.iter_mut())
                .find(|f| f.id == line.face_id)
            else {
                self.warnings.push(IngestWarning::DanglingEmotionLabel { face_id: line.face_id });
                continue;
            };
            match line.label.trim().to_lowercase().parse::<Emotion>() {
                Ok(e) => face.emotion = Some(e),
                Err(_) => self.warnings.push(IngestWarning::UnknownEmotionLabel {
                    face_id: line.face_id,
                    label: line.label,
                }),
            }
        }
        for line in links.into_iter().filter(|l| l.title == self.title_id) {
            let text_exists = self.pages.iter().any(|p| p.text(&line.text_id).is_some());
            if !text_exists || self.character(&line.speaker_id).is_none() {
                self.warnings.push(IngestWarning::DanglingSpeakerLink {
                    text_id: line.text_id,
                    speaker_id: line.speaker_id,
                });
                continue;
            }
            self.speaker_links.push(SpeakerLink {
                title_id: self.title_id.clone(),
                text_element_id: line.text_id,
                speaker_character_id: line.speaker_id,
            });
        }
        // Canonical order: the order of the linked texts in the title.
        let position = |id: &str| {
            self.pages
                .iter()
                .flat_map(|p| &p.texts)
                .position(|t| t.id == id)
                .unwrap_or(usize::MAX)
        };
        let mut keyed: Vec<_> = self
            .speaker_links
            .drain(..)
            .map(|l| (position(&l.text_element_id), l))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.1.text_element_id == b.1.text_element_id);
        self.speaker_links = keyed.into_iter().map(|(_, l)| l).collect();
    }

    pub fn speaker_of(&self, text_id: &str) -> Option<&str> {
        self.speaker_links
            .iter()
            .find(|l| l.text_element_id == text_id)
            .map(|l| l.speaker_character_id.as_str())
    }
}

/// Reads a title from its annotation XML and optional sidecar files.
pub fn parse_title(
    annotation_file: &Path,
    speaker_file: Option<&Path>,
    emotion_file: Option<&Path>,
) -> Result<TitleCorpus, IngestError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| IngestError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let mut corpus = parse_xml(&read(annotation_file)?)?;
    let links = match speaker_file {
        Some(p) => sidecar::parse_lines::<SpeakerLinkLine>(&read(p)?, &p.display().to_string())?,
        None => Vec::new(),
    };
    let labels = match emotion_file {
        Some(p) => sidecar::parse_lines::<EmotionLabelLine>(&read(p)?, &p.display().to_string())?,
        None => Vec::new(),
    };
    corpus.attach_sidecars(links, labels);
    Ok(corpus)
}

/// Serializes a corpus to its three interchange documents: XML, speaker links, emotion labels.
pub fn serialize_title(corpus: &TitleCorpus) -> (String, String, String) {
    (
        write_xml(corpus),
        sidecar::speaker_lines(corpus),
        sidecar::emotion_lines(corpus),
    )
}
