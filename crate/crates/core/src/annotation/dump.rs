//! Canonical JSON-lines corpus dump: a title header line followed by one line per page.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Body, Character, Face, Frame, IngestError, IngestWarning, PageAnnotation, SpeakerLink, TextRegion, TitleCorpus};
use crate::layout::RegionLayout;

pub const CORPUS_SCHEMA: &str = "title_v1";
pub const PAGE_SCHEMA: &str = "page_v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleRecord {
    pub schema: String,
    pub title: String,
    pub characters: Vec<Character>,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRef {
    pub text_id: String,
    pub speaker_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRecord {
    pub schema: String,
    pub title: String,
    pub page_index: u32,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<Frame>,
    pub texts: Vec<TextRegion>,
    pub bodies: Vec<Body>,
    pub faces: Vec<Face>,
    pub speaker_links: Vec<LinkRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<RegionLayout>>,
}

/// Writes one title. `layouts`, when given, attaches each page's frame sequences.
pub fn write_corpus_jsonl(corpus: &TitleCorpus, layouts: Option<&BTreeMap<u32, Vec<RegionLayout>>>) -> String {
    let mut out = String::new();
    let header = TitleRecord {
        schema: CORPUS_SCHEMA.to_string(),
        title: corpus.title_id.clone(),
        characters: corpus.characters.clone(),
        warnings: corpus.warnings.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("serializable"));
    out.push('\n');
    for page in &corpus.pages {
        let speaker_links = page
            .texts
            .iter()
            .filter_map(|t| {
                corpus.speaker_of(&t.id).map(|s| LinkRef {
                    text_id: t.id.clone(),
                    speaker_id: s.to_string(),
                })
            })
            .collect();
        let record = PageRecord {
            schema: PAGE_SCHEMA.to_string(),
            title: corpus.title_id.clone(),
            page_index: page.page_index,
            width: page.width,
            height: page.height,
            frames: page.frames.clone(),
            texts: page.texts.clone(),
            bodies: page.bodies.clone(),
            faces: page.faces.clone(),
            speaker_links,
            layout: layouts.and_then(|l| l.get(&page.page_index).cloned()),
        };
        out.push_str(&serde_json::to_string(&record).expect("serializable"));
        out.push('\n');
    }
    out
}

/// Reads every title in a dump. Layout attachments are ignored.
pub fn read_corpus_jsonl(src: &str) -> Result<Vec<TitleCorpus>, IngestError> {
    let mut titles: Vec<TitleCorpus> = Vec::new();
    for (i, line) in src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let err = |message: String| IngestError::Sidecar { path: "<corpus dump>".into(), line: i + 1, message };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(CORPUS_SCHEMA) => {
                let r: TitleRecord = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
                titles.push(TitleCorpus {
                    title_id: r.title,
                    characters: r.characters,
                    pages: Vec::new(),
                    speaker_links: Vec::new(),
                    warnings: r.warnings,
                });
            }
            Some(PAGE_SCHEMA) => {
                let r: PageRecord = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
                let title = titles
                    .last_mut()
                    .filter(|t| t.title_id == r.title)
                    .ok_or_else(|| err(format!("page of {:?} before its title header", r.title)))?;
                title.speaker_links.extend(r.speaker_links.into_iter().map(|l| SpeakerLink {
                    title_id: r.title.clone(),
                    text_element_id: l.text_id,
                    speaker_character_id: l.speaker_id,
                }));
                title.pages.push(PageAnnotation {
                    title_id: r.title,
                    page_index: r.page_index,
                    width: r.width,
                    height: r.height,
                    frames: r.frames,
                    texts: r.texts,
                    bodies: r.bodies,
                    faces: r.faces,
                });
            }
            other => return Err(err(format!("unknown schema {other:?}"))),
        }
    }
    Ok(titles)
}
