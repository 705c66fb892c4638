//! The three perception channels behind interchangeable backends.
//!
//! * identity: each character instance → one of k main characters or OTHERS
//! * intensity: each character instance → a real-valued emotion strength logit
//! * OCR: each text region → its string
//!
//! Oracle backends read the annotations. Noisy and miscalibrated oracles
//! inject seeded errors. Adapter backends talk to external models over
//! [`adapter`].

pub mod adapter;
mod registry;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::sync::Arc;

use crate::annotation::{Body, ElementId, Emotion};
use crate::labels::{Identity, OTHERS};
use crate::layout::SceneGraph;
use crate::seed::derive_rng;

use adapter::{AdapterClient, AdapterError, AdapterItem, AdapterOp, AdapterRequest};
pub use registry::{
    build_registry, crop_pool, CharacterRegistry, CropRef, ReferenceSet, RegistryBuild, RegistryError,
    RegistryParams, RegistryWarning, DEFAULT_MIN_APPEARANCES, DEFAULT_N_REF,
};

/// Logit magnitude emitted by oracle intensity backends.
pub const ORACLE_LOGIT: f64 = 2.0;
/// Probability that the miscalibrated oracle calls a neutral face strong.
pub const NEUTRAL_FLIP_RATE: f64 = 0.584;
/// Probability that the miscalibrated oracle calls an expressive face neutral.
pub const STRONG_FLIP_RATE: f64 = 0.122;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharPrediction {
    pub instance_id: ElementId,
    pub predicted: Identity,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CharPrediction {
    fn failed(instance_id: &str, error: String) -> Self {
        Self {
            instance_id: instance_id.to_string(),
            predicted: Identity::Others,
            confidence: 0.0,
            error: Some(error),
        }
    }
}

/// Binary emotion intensity with the raw logit kept as a strength score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionIntensity {
    pub instance_id: ElementId,
    pub logit: f64,
    pub strong: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EmotionIntensity {
    pub fn from_logit(instance_id: &str, logit: f64) -> Self {
        Self {
            instance_id: instance_id.to_string(),
            logit,
            strong: logit > 0.0,
            error: None,
        }
    }

    fn failed(instance_id: &str, error: String) -> Self {
        Self {
            error: Some(error),
            ..Self::from_logit(instance_id, 0.0)
        }
    }
}

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("OCR adapter returned {got} strings for {expected} text boxes")]
    OcrArity { expected: usize, got: usize },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

pub trait IdentityBackend: Send + Sync {
    fn identify(&self, scene: &SceneGraph) -> Vec<CharPrediction>;

    fn single_flight(&self) -> bool {
        false
    }
}

pub trait IntensityBackend: Send + Sync {
    fn estimate(&self, scene: &SceneGraph) -> Vec<EmotionIntensity>;

    fn single_flight(&self) -> bool {
        false
    }
}

pub trait OcrBackend: Send + Sync {
    /// One string per text region, in scene order.
    fn recognize(&self, scene: &SceneGraph) -> Result<Vec<String>, PerceptionError>;

    fn single_flight(&self) -> bool {
        false
    }
}

/// Batched identity for every character instance of the scene.
///
/// Always returns exactly one prediction per instance, in scene order; any
/// instance a backend failed to cover becomes an OTHERS error entry.
pub fn identify_characters(scene: &SceneGraph, backend: &dyn IdentityBackend) -> Vec<CharPrediction> {
    let raw = backend.identify(scene);
    scene
        .chars
        .iter()
        .map(|c| {
            raw.iter()
                .find(|p| p.instance_id == c.id)
                .cloned()
                .unwrap_or_else(|| CharPrediction::failed(&c.id, "backend returned no prediction".into()))
        })
        .collect()
}

/// Batched intensity for every character instance of the scene.
pub fn estimate_intensity(scene: &SceneGraph, backend: &dyn IntensityBackend) -> Vec<EmotionIntensity> {
    let raw = backend.estimate(scene);
    scene
        .chars
        .iter()
        .map(|c| {
            let mut e = raw
                .iter()
                .find(|p| p.instance_id == c.id)
                .cloned()
                .unwrap_or_else(|| EmotionIntensity::failed(&c.id, "backend returned no score".into()));
            e.strong = e.logit > 0.0;
            e
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OcrOutput {
    /// Aligned with `scene.texts`.
    pub texts: Vec<String>,
    pub warnings: Vec<String>,
}

/// Recognized strings for every text region. A transport failure yields empty
/// strings and a warning; a reply with the wrong number of strings is an error.
pub fn ocr_text(scene: &SceneGraph, backend: &dyn OcrBackend) -> Result<OcrOutput, PerceptionError> {
    match backend.recognize(scene) {
        Ok(texts) if texts.len() == scene.n_text() => Ok(OcrOutput { texts, warnings: Vec::new() }),
        Ok(texts) => Err(PerceptionError::OcrArity {
            expected: scene.n_text(),
            got: texts.len(),
        }),
        Err(e @ (PerceptionError::Adapter(AdapterError::Protocol(_)) | PerceptionError::OcrArity { .. })) => Err(e),
        Err(e) => Ok(OcrOutput {
            texts: vec![String::new(); scene.n_text()],
            warnings: vec![format!("{}: {e}", scene.key())],
        }),
    }
}

/// Annotated emotion of a body: the labelled face of the same character whose
/// center lies inside the body box, nearest the body's center.
pub fn body_emotion(scene: &SceneGraph, body: &Body) -> Option<Emotion> {
    scene
        .faces
        .iter()
        .filter(|f| f.character == body.character && body.bbox.contains_point(f.bbox.center()))
        .filter_map(|f| f.emotion.map(|e| (f, e)))
        .min_by(|(a, _), (b, _)| {
            let da = a.bbox.center_distance(&body.bbox);
            let db = b.bbox.center_distance(&body.bbox);
            da.total_cmp(&db).then_with(|| a.id.cmp(&b.id))
        })
        .map(|(_, e)| e)
}

/// Whether the annotation marks this body as visibly emotional.
pub fn annotated_strong(scene: &SceneGraph, body: &Body) -> bool {
    body_emotion(scene, body).is_some_and(|e| e != Emotion::Neutral)
}

pub struct OracleIdentity {
    pub registry: CharacterRegistry,
}

impl IdentityBackend for OracleIdentity {
    fn identify(&self, scene: &SceneGraph) -> Vec<CharPrediction> {
        scene
            .chars
            .iter()
            .map(|c| CharPrediction {
                instance_id: c.id.clone(),
                predicted: self.registry.classify(&c.character),
                confidence: 1.0,
                error: None,
            })
            .collect()
    }
}

/// Oracle identity that replaces each label, with probability `epsilon`, by a
/// uniformly drawn wrong one among the k+1 classes.
pub struct NoisyIdentity {
    pub registry: CharacterRegistry,
    pub epsilon: f64,
    pub seed: u64,
}

impl IdentityBackend for NoisyIdentity {
    fn identify(&self, scene: &SceneGraph) -> Vec<CharPrediction> {
        let labels = self.registry.labels();
        let key = scene.key();
        scene
            .chars
            .iter()
            .map(|c| {
                let truth = self.registry.classify(&c.character);
                let mut rng = derive_rng(self.seed, &["identity", &key, &c.id]);
                let flip = rng.gen::<f64>() < self.epsilon;
                let predicted = if flip && labels.len() > 1 {
                    let wrong: Vec<&Identity> = labels.iter().filter(|l| **l != truth).collect();
                    wrong[rng.gen_range(0..wrong.len())].clone()
                } else {
                    truth
                };
                CharPrediction {
                    instance_id: c.id.clone(),
                    predicted,
                    confidence: (1.0 - self.epsilon).clamp(0.0, 1.0),
                    error: None,
                }
            })
            .collect()
    }
}

/// Labelled non-neutral faces score `+magnitude`, everything else `-magnitude`.
pub struct OracleIntensity {
    pub magnitude: f64,
}

impl Default for OracleIntensity {
    fn default() -> Self {
        Self { magnitude: ORACLE_LOGIT }
    }
}

impl IntensityBackend for OracleIntensity {
    fn estimate(&self, scene: &SceneGraph) -> Vec<EmotionIntensity> {
        scene
            .chars
            .iter()
            .map(|c| {
                let z = if annotated_strong(scene, c) { self.magnitude } else { -self.magnitude };
                EmotionIntensity::from_logit(&c.id, z)
            })
            .collect()
    }
}

/// Oracle intensity with the per-class error rates of a real binary
/// classifier: neutral faces read as strong 58.4% of the time, expressive
/// faces read as neutral 12.2% of the time.
pub struct MiscalibratedIntensity {
    pub magnitude: f64,
    pub neutral_flip: f64,
    pub strong_flip: f64,
    pub seed: u64,
}

impl MiscalibratedIntensity {
    pub fn new(seed: u64) -> Self {
        Self {
            magnitude: ORACLE_LOGIT,
            neutral_flip: NEUTRAL_FLIP_RATE,
            strong_flip: STRONG_FLIP_RATE,
            seed,
        }
    }
}

impl IntensityBackend for MiscalibratedIntensity {
    fn estimate(&self, scene: &SceneGraph) -> Vec<EmotionIntensity> {
        let key = scene.key();
        scene
            .chars
            .iter()
            .map(|c| {
                let strong = annotated_strong(scene, c);
                let mut rng = derive_rng(self.seed, &["intensity", &key, &c.id]);
                let p = if strong { self.strong_flip } else { self.neutral_flip };
                let reported = strong ^ (rng.gen::<f64>() < p);
                EmotionIntensity::from_logit(&c.id, if reported { self.magnitude } else { -self.magnitude })
            })
            .collect()
    }
}

pub struct OracleOcr;

impl OcrBackend for OracleOcr {
    fn recognize(&self, scene: &SceneGraph) -> Result<Vec<String>, PerceptionError> {
        Ok(scene.texts.iter().map(|t| t.content.clone()).collect())
    }
}

/// All three channels served by one external adapter.
pub struct AdapterBackend {
    pub client: Arc<AdapterClient>,
    pub registry: CharacterRegistry,
}

impl AdapterBackend {
    fn request(&self, op: AdapterOp, scene: &SceneGraph, items: Vec<AdapterItem>) -> AdapterRequest {
        AdapterRequest {
            op,
            title: scene.title_id.clone(),
            page: scene.page_index,
            image: self.client.image_path(&scene.title_id, scene.page_index),
            items,
        }
    }

    fn char_items(scene: &SceneGraph) -> Vec<AdapterItem> {
        scene.chars.iter().map(|c| AdapterItem::boxed(&c.id, c.bbox)).collect()
    }
}

impl IdentityBackend for AdapterBackend {
    fn identify(&self, scene: &SceneGraph) -> Vec<CharPrediction> {
        if scene.chars.is_empty() {
            return Vec::new();
        }
        let req = self.request(AdapterOp::Identify, scene, Self::char_items(scene));
        match self.client.call(&req) {
            Ok(resp) => resp
                .items
                .iter()
                .map(|item| match item.str_field("label") {
                    Some(label) if label != OTHERS => CharPrediction {
                        instance_id: item.id.clone(),
                        predicted: self.registry.classify(label),
                        confidence: item.f64_field("confidence").unwrap_or(0.0).clamp(0.0, 1.0),
                        error: None,
                    },
                    Some(_) => CharPrediction {
                        instance_id: item.id.clone(),
                        predicted: Identity::Others,
                        confidence: item.f64_field("confidence").unwrap_or(0.0).clamp(0.0, 1.0),
                        error: None,
                    },
                    None => CharPrediction::failed(&item.id, "missing label".into()),
                })
                .collect(),
            Err(e) => scene.chars.iter().map(|c| CharPrediction::failed(&c.id, e.to_string())).collect(),
        }
    }

    fn single_flight(&self) -> bool {
        self.client.single_flight()
    }
}

impl IntensityBackend for AdapterBackend {
    fn estimate(&self, scene: &SceneGraph) -> Vec<EmotionIntensity> {
        if scene.chars.is_empty() {
            return Vec::new();
        }
        let req = self.request(AdapterOp::Intensity, scene, Self::char_items(scene));
        match self.client.call(&req) {
            Ok(resp) => resp
                .items
                .iter()
                .map(|item| match item.f64_field("logit") {
                    Some(z) => EmotionIntensity::from_logit(&item.id, z),
                    None => EmotionIntensity::failed(&item.id, "missing logit".into()),
                })
                .collect(),
            Err(e) => scene.chars.iter().map(|c| EmotionIntensity::failed(&c.id, e.to_string())).collect(),
        }
    }

    fn single_flight(&self) -> bool {
        self.client.single_flight()
    }
}

impl OcrBackend for AdapterBackend {
    fn recognize(&self, scene: &SceneGraph) -> Result<Vec<String>, PerceptionError> {
        if scene.texts.is_empty() {
            return Ok(Vec::new());
        }
        let items = scene.texts.iter().map(|t| AdapterItem::boxed(&t.id, t.bbox)).collect();
        let resp = self.client.call(&self.request(AdapterOp::Ocr, scene, items))?;
        Ok(resp
            .items
            .iter()
            .map(|i| i.str_field("text").unwrap_or_default().to_string())
            .collect())
    }

    fn single_flight(&self) -> bool {
        self.client.single_flight()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Face, TextRegion};
    use crate::geometry::BBox;

    fn b(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn scene() -> SceneGraph {
        SceneGraph {
            title_id: "T".into(),
            page_index: 0,
            region: 0,
            bounds: b(0, 0, 1000, 1000),
            frames: vec![],
            texts: vec![
                TextRegion { id: "t1".into(), bbox: b(0, 0, 10, 10), content: "「え？」".into() },
                TextRegion { id: "t2".into(), bbox: b(20, 0, 30, 10), content: "line\nbreak \"q\"".into() },
            ],
            chars: vec![
                Body { id: "a1".into(), bbox: b(100, 100, 200, 300), character: "A".into() },
                Body { id: "m1".into(), bbox: b(300, 100, 400, 300), character: "M".into() },
                Body { id: "a2".into(), bbox: b(500, 100, 600, 300), character: "A".into() },
            ],
            faces: vec![
                Face { id: "fa1".into(), bbox: b(120, 110, 180, 160), character: "A".into(), emotion: Some(Emotion::Anger) },
                Face { id: "fa2".into(), bbox: b(520, 110, 580, 160), character: "A".into(), emotion: Some(Emotion::Neutral) },
            ],
        }
    }

    fn registry() -> CharacterRegistry {
        CharacterRegistry { title_id: "T".into(), main_characters: vec!["A".into(), "B".into()] }
    }

    #[test]
    fn oracle_identity_maps_minor_to_others() {
        let preds = identify_characters(&scene(), &OracleIdentity { registry: registry() });
        assert_eq!(preds.len(), 3);
        assert_eq!((preds[0].predicted.clone(), preds[0].confidence), (Identity::Character("A".into()), 1.0));
        assert_eq!(preds[1].predicted, Identity::Others);
    }

    #[test]
    fn zero_noise_equals_oracle() {
        let s = scene();
        let oracle = identify_characters(&s, &OracleIdentity { registry: registry() });
        let noisy = identify_characters(&s, &NoisyIdentity { registry: registry(), epsilon: 0.0, seed: 3 });
        let labels = |v: &[CharPrediction]| v.iter().map(|p| p.predicted.clone()).collect::<Vec<_>>();
        assert_eq!(labels(&oracle), labels(&noisy));
    }

    #[test]
    fn full_noise_never_hits_truth() {
        let mut s = scene();
        let reg = registry();
        for trial in 0..1000 {
            s.page_index = trial;
            for p in identify_characters(&s, &NoisyIdentity { registry: reg.clone(), epsilon: 1.0, seed: 11 }) {
                let truth = reg.classify(&s.char_instance(&p.instance_id).unwrap().character);
                assert_ne!(p.predicted, truth);
            }
        }
    }

    #[test]
    fn oracle_intensity_follows_face_labels() {
        let out = estimate_intensity(&scene(), &OracleIntensity::default());
        let z: Vec<f64> = out.iter().map(|e| e.logit).collect();
        assert_eq!(z, [2.0, -2.0, -2.0]);
        assert!(out[0].strong && !out[1].strong && !out[2].strong);
    }

    #[test]
    fn intensity_flag_matches_logit_sign() {
        let out = estimate_intensity(&scene(), &MiscalibratedIntensity::new(5));
        assert!(out.iter().all(|e| e.strong == (e.logit > 0.0)));
    }

    #[test]
    fn oracle_ocr_copies_content() {
        let out = ocr_text(&scene(), &OracleOcr).unwrap();
        assert_eq!(out.texts, ["「え？」", "line\nbreak \"q\""]);
    }

    fn adapter(reply: &'static str) -> AdapterBackend {
        AdapterBackend {
            client: Arc::new(AdapterClient::new(Box::new(move |_: &str| Ok(reply.to_string())))),
            registry: registry(),
        }
    }

    #[test]
    fn ocr_arity_mismatch_is_protocol_error() {
        let short = adapter(r#"{"items":[{"id":"t1","text":"x"}]}"#);
        assert!(ocr_text(&scene(), &short).is_err());
    }

    #[test]
    fn ocr_transport_failure_degrades_to_empty() {
        let down = AdapterBackend {
            client: Arc::new(AdapterClient::new(Box::new(|_: &str| Err(AdapterError::Transport("down".into()))))),
            registry: registry(),
        };
        let out = ocr_text(&scene(), &down).unwrap();
        assert_eq!(out.texts, ["", ""]);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn echo_ocr_round_trips_bytes() {
        // The echo transport answers each box with the string stored for it.
        let s = scene();
        let expected: Vec<String> = s.texts.iter().map(|t| t.content.clone()).collect();
        let table = expected.clone();
        let echo = AdapterBackend {
            client: Arc::new(AdapterClient::new(Box::new(move |line: &str| {
                let req: AdapterRequest = serde_json::from_str(line).unwrap();
                let items: Vec<_> = req
                    .items
                    .iter()
                    .enumerate()
                    .map(|(i, it)| serde_json::json!({"id": it.id, "text": table[i]}))
                    .collect();
                Ok(serde_json::json!({ "items": items }).to_string())
            }))),
            registry: registry(),
        };
        assert_eq!(ocr_text(&s, &echo).unwrap().texts, expected);
    }

    #[test]
    fn adapter_failure_yields_others_entries() {
        let broken = adapter(r#"{"items":[]}"#);
        let preds = identify_characters(&scene(), &broken);
        assert_eq!(preds.len(), 3);
        assert!(preds.iter().all(|p| p.predicted == Identity::Others && p.error.is_some()));
        let z = estimate_intensity(&scene(), &broken);
        assert!(z.iter().all(|e| !e.strong && e.error.is_some()));
    }

    #[test]
    fn adapter_labels_outside_registry_become_others() {
        let a = adapter(
            r#"{"items":[{"id":"a1","label":"A","confidence":0.9},{"id":"m1","label":"Z","confidence":0.4},{"id":"a2","label":"OTHERS","confidence":0.5}]}"#,
        );
        let preds = identify_characters(&scene(), &a);
        assert_eq!(preds[0].predicted, Identity::Character("A".into()));
        assert_eq!(preds[1].predicted, Identity::Others);
        assert_eq!(preds[2].predicted, Identity::Others);
    }
}
