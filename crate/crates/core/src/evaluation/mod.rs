//! Scoring predictions against linked ground truth.
//!
//! Speaker accuracy is split by case difficulty. Emotion scoring covers the
//! five evaluated labels; predictions of the two excluded labels lower recall
//! without entering any class's precision denominator, which is why micro
//! precision and micro recall can differ on single-label data.

mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use render::{render_report, ReportFormat};

use crate::annotation::{ElementId, Emotion, LinkedSample};
use crate::error::ArgumentError;
use crate::labels::{Method, Speaker};
use crate::layout::CaseDifficulty;

pub const REPORT_SCHEMA: &str = "report_v1";

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub title: String,
    pub page: u32,
    pub text_id: ElementId,
    pub pred_speaker: Speaker,
    pub pred_emotion: Option<Emotion>,
    pub method: Method,
    #[serde(default)]
    pub flags: Vec<String>,
}

pub type SampleKey = (String, ElementId);

pub fn sample_key(s: &LinkedSample) -> SampleKey {
    (s.title_id.clone(), s.text_element_id.clone())
}

/// Rounds a percentage to one decimal, halves away from zero.
///
/// The small epsilon absorbs binary representation error so that values like
/// 41.35 computed from a ratio round up the way a hand calculation would.
pub fn round1(x: f64) -> f64 {
    ((x * 10.0) + 0.5 + 1e-9).floor() / 10.0
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub support: usize,
    pub percent: f64,
}

impl Accuracy {
    fn new(correct: usize, support: usize) -> Self {
        Self { correct, support, percent: pct(correct, support).unwrap_or(0.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeakerBlock {
    pub easy: Accuracy,
    pub hard: Accuracy,
    pub total: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: Emotion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub true_positives: usize,
    pub predicted: usize,
    /// Set when a denominator was zero and the metric defaulted to 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionBlock {
    pub per_class: Vec<ClassScore>,
    pub micro: Aggregate,
    pub macro_avg: Aggregate,
    pub weighted: Aggregate,
    /// Gold samples whose label is outside the evaluated set.
    pub excluded_gold: usize,
    /// Evaluated samples whose prediction fell outside the evaluated set.
    pub out_of_set_predictions: usize,
}

impl EmotionBlock {
    pub fn class(&self, label: Emotion) -> Option<&ClassScore> {
        self.per_class.iter().find(|c| c.label == label)
    }
}

/// Gold label (rows) by predicted label (columns) over all seven labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub labels: Vec<Emotion>,
    pub counts: Vec<Vec<usize>>,
}

impl Default for Confusion {
    fn default() -> Self {
        Self { labels: Emotion::ALL.to_vec(), counts: vec![vec![0; Emotion::ALL.len()]; Emotion::ALL.len()] }
    }
}

impl Confusion {
    pub fn get(&self, gold: Emotion, pred: Emotion) -> usize {
        self.counts[gold.index()][pred.index()]
    }

    pub fn row_sum(&self, gold: Emotion) -> usize {
        self.counts[gold.index()].iter().sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Cell-wise sum, for merging partial tallies.
    pub fn merge(&mut self, other: &Confusion) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub method_tag: String,
    pub speaker: SpeakerBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<EmotionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<Accuracy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn empty(method_tag: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            method_tag: method_tag.into(),
            speaker: SpeakerBlock::default(),
            emotion: None,
            confusion: None,
            joint: None,
            warnings: Vec::new(),
        }
    }
}

/// Predictions indexed by sample, with a warning per prediction that matches no gold sample.
fn index<'a>(
    preds: &'a [PredictionRecord],
    gold: &[LinkedSample],
    warnings: &mut Vec<String>,
) -> BTreeMap<SampleKey, &'a PredictionRecord> {
    let known: std::collections::BTreeSet<SampleKey> = gold.iter().map(sample_key).collect();
    let mut out = BTreeMap::new();
    let mut unknown: Vec<&PredictionRecord> = Vec::new();
    for p in preds {
        let key = (p.title.clone(), p.text_id.clone());
        if !known.contains(&key) {
            unknown.push(p);
            continue;
        }
        if out.insert(key, p).is_some() {
            warnings.push(format!("duplicate prediction for {}/{}; the last one counts", p.title, p.text_id));
        }
    }
    if let Some(first) = unknown.first() {
        warnings.push(format!(
            "{} prediction(s) for texts outside the evaluation set ignored, first {}/{}",
            unknown.len(),
            first.title,
            first.text_id
        ));
    }
    out
}

fn speaker_correct(p: Option<&&PredictionRecord>, s: &LinkedSample) -> bool {
    p.is_some_and(|p| p.pred_speaker.is(&s.gt_speaker))
}

/// Speaker accuracy by difficulty. A missing prediction counts as wrong.
pub fn score_speakers(
    preds: &[PredictionRecord],
    gold: &[LinkedSample],
    difficulties: &BTreeMap<SampleKey, CaseDifficulty>,
) -> Result<(SpeakerBlock, Vec<String>), ArgumentError> {
    let mut warnings = Vec::new();
    let by_key = index(preds, gold, &mut warnings);
    let (mut easy, mut hard) = ((0, 0), (0, 0));
    for s in gold {
        let key = sample_key(s);
        let bucket = match difficulties.get(&key) {
            Some(CaseDifficulty::Easy) => &mut easy,
            Some(CaseDifficulty::Hard) => &mut hard,
            None => return Err(ArgumentError(format!("no difficulty for {}/{}", key.0, key.1))),
        };
        let p = by_key.get(&key);
        if p.is_none() {
            warnings.push(format!("no prediction for {}/{}; counted as wrong", key.0, key.1));
        }
        bucket.1 += 1;
        bucket.0 += usize::from(speaker_correct(p, s));
    }
    let block = SpeakerBlock {
        easy: Accuracy::new(easy.0, easy.1),
        hard: Accuracy::new(hard.0, hard.1),
        total: Accuracy::new(easy.0 + hard.0, easy.1 + hard.1),
    };
    Ok((block, warnings))
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Counts of gold versus predicted labels; missing emotion predictions count
/// as neutral and are reported.
pub fn tally(preds: &[PredictionRecord], gold: &[LinkedSample]) -> (Confusion, Vec<String>) {
    let mut warnings = Vec::new();
    let by_key = index(preds, gold, &mut Vec::new());
    let mut confusion = Confusion::default();
    for s in gold {
        let Some(g) = s.gt_emotion else { continue };
        let pred = match by_key.get(&sample_key(s)).and_then(|p| p.pred_emotion) {
            Some(e) => e,
            None => {
                warnings.push(format!("no emotion prediction for {}/{}; counted as neutral", s.title_id, s.text_element_id));
                Emotion::Neutral
            }
        };
        confusion.counts[g.index()][pred.index()] += 1;
    }
    (confusion, warnings)
}

/// Per-class and aggregate scores derived from a confusion matrix.
pub fn emotion_block(confusion: &Confusion) -> EmotionBlock {
    let per_class: Vec<ClassScore> = Emotion::EVALUATED
        .iter()
        .map(|&label| {
            let tp = confusion.get(label, label);
            let support = confusion.row_sum(label);
            // Only evaluated gold rows contribute false positives.
            let predicted: usize = Emotion::EVALUATED.iter().map(|&g| confusion.get(g, label)).sum();
            let precision = pct(tp, predicted);
            let recall = pct(tp, support);
            let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
            ClassScore {
                label,
                precision: p,
                recall: r,
                f1: f1(p, r),
                support,
                true_positives: tp,
                predicted,
                zero_division: precision.is_none() || recall.is_none(),
            }
        })
        .collect();

    let support: usize = per_class.iter().map(|c| c.support).sum();
    let tp: usize = per_class.iter().map(|c| c.true_positives).sum();
    let in_set: usize = per_class.iter().map(|c| c.predicted).sum();
    let micro_p = pct(tp, in_set).unwrap_or(0.0);
    let micro_r = pct(tp, support).unwrap_or(0.0);
    let n = per_class.len() as f64;
    let mean = |f: fn(&ClassScore) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    let weighted = |f: fn(&ClassScore) -> f64| {
        if support == 0 {
            0.0
        } else {
            per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / support as f64
        }
    };
    let excluded_gold = Emotion::ALL
        .iter()
        .filter(|e| !e.is_evaluated())
        .map(|&e| confusion.row_sum(e))
        .sum();

    EmotionBlock {
        micro: Aggregate { precision: micro_p, recall: micro_r, f1: f1(micro_p, micro_r), support },
        macro_avg: Aggregate { precision: mean(|c| c.precision), recall: mean(|c| c.recall), f1: mean(|c| c.f1), support },
        weighted: Aggregate {
            precision: weighted(|c| c.precision),
            recall: weighted(|c| c.recall),
            f1: weighted(|c| c.f1),
            support,
        },
        excluded_gold,
        out_of_set_predictions: support - in_set,
        per_class,
    }
}

/// Five-way emotion scores plus the full confusion matrix.
pub fn score_emotions(preds: &[PredictionRecord], gold: &[LinkedSample]) -> (EmotionBlock, Confusion, Vec<String>) {
    let (confusion, warnings) = tally(preds, gold);
    (emotion_block(&confusion), confusion, warnings)
}

/// Share of samples whose speaker and emotion are both right.
pub fn score_joint(preds: &[PredictionRecord], gold: &[LinkedSample]) -> Accuracy {
    let by_key = index(preds, gold, &mut Vec::new());
    let correct = gold
        .iter()
        .filter(|s| {
            let p = by_key.get(&sample_key(s));
            speaker_correct(p, s) && s.gt_emotion.is_some() && p.and_then(|p| p.pred_emotion) == s.gt_emotion
        })
        .count();
    Accuracy::new(correct, gold.len())
}

/// Restricts linked samples to those with an evaluated emotion label.
pub fn evaluation_set(linked: &[LinkedSample]) -> Vec<LinkedSample> {
    linked
        .iter()
        .filter(|s| s.gt_emotion.is_some_and(Emotion::is_evaluated))
        .cloned()
        .collect()
}

/// Full report. Emotion and joint blocks are filled only when some
/// prediction carries an emotion.
pub fn evaluate(
    method_tag: &str,
    preds: &[PredictionRecord],
    gold: &[LinkedSample],
    difficulties: &BTreeMap<SampleKey, CaseDifficulty>,
) -> Result<EvalReport, ArgumentError> {
    let (speaker, mut warnings) = score_speakers(preds, gold, difficulties)?;
    let mut report = EvalReport { speaker, ..EvalReport::empty(method_tag) };
    if preds.iter().any(|p| p.pred_emotion.is_some()) {
        let (block, confusion, w) = score_emotions(preds, gold);
        warnings.extend(w);
        report.emotion = Some(block);
        report.confusion = Some(confusion);
        report.joint = Some(score_joint(preds, gold));
    }
    report.warnings = warnings;
    Ok(report)
}
