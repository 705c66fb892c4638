use serde::{Deserialize, Serialize};

use super::{CharacterId, ElementId, Emotion, TitleCorpus};
use crate::error::ArgumentError;

/// A speaker-linked dialogue line with its (optional) emotion label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedSample {
    pub title_id: String,
    pub text_element_id: ElementId,
    pub page_index: u32,
    pub content: String,
    pub gt_speaker: CharacterId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_emotion: Option<Emotion>,
}

/// Joins speaker links with face emotion labels through the speaking character.
///
/// The label comes from an emotion-labelled face of the speaker on the same
/// page. With several such faces the one whose center is nearest the text's
/// center wins; equal distances fall back to the smaller face id.
pub fn build_linked_set(corpus: &TitleCorpus) -> Vec<LinkedSample> {
    let mut out = Vec::new();
    for page in &corpus.pages {
        for text in &page.texts {
            let Some(speaker) = corpus.speaker_of(&text.id) else { continue };
            let gt_emotion = page
                .faces
                .iter()
                .filter(|f| f.character == speaker)
                .filter_map(|f| f.emotion.map(|e| (f, e)))
                .min_by(|(a, _), (b, _)| {
                    let da = a.bbox.center_distance(&text.bbox);
                    let db = b.bbox.center_distance(&text.bbox);
                    da.total_cmp(&db).then_with(|| a.id.cmp(&b.id))
                })
                .map(|(_, e)| e);
            out.push(LinkedSample {
                title_id: corpus.title_id.clone(),
                text_element_id: text.id.clone(),
                page_index: page.page_index,
                content: text.content.clone(),
                gt_speaker: speaker.to_string(),
                gt_emotion,
            });
        }
    }
    out
}

/// The `n` titles with the most emotion annotations, ties broken by title id.
pub fn select_test_titles(corpora: &[TitleCorpus], n: usize) -> Result<Vec<String>, ArgumentError> {
    if n > corpora.len() {
        return Err(ArgumentError(format!(
            "asked for {n} test titles but only {} are available",
            corpora.len()
        )));
    }
    let mut ranked: Vec<(usize, &str)> = corpora
        .iter()
        .map(|c| (c.emotion_annotation_count(), c.title_id.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(ranked.into_iter().take(n).map(|(_, t)| t.to_string()).collect())
}
