//! Rule-based speaker attribution: nearest character on the page, or nearest
//! character within the text's frame.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{Body, ElementId};
use crate::geometry::BBox;
use crate::labels::{Identity, Method, Speaker};
use crate::layout::{FrameSequence, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Euclidean distance between box centers.
    #[default]
    Center,
    /// Shortest gap between box edges.
    Edge,
}

impl DistanceMetric {
    fn measure(self, a: &BBox, b: &BBox) -> f64 {
        match self {
            DistanceMetric::Center => a.center_distance(b),
            DistanceMetric::Edge => a.edge_distance(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerPrediction {
    pub text_id: ElementId,
    /// `None` when the method abstained.
    pub instance: Option<ElementId>,
    pub speaker: Speaker,
    pub method: Method,
}

/// Instance id → identity, as produced by the identity channel.
pub type Identities = BTreeMap<ElementId, Identity>;

fn nearest<'a>(text: &BBox, candidates: impl Iterator<Item = &'a Body>, metric: DistanceMetric) -> Option<&'a Body> {
    candidates.min_by(|a, b| {
        metric
            .measure(text, &a.bbox)
            .total_cmp(&metric.measure(text, &b.bbox))
            .then_with(|| a.id.cmp(&b.id))
    })
}

fn predict(text_id: &str, instance: Option<&Body>, identities: &Identities, method: Method) -> SpeakerPrediction {
    SpeakerPrediction {
        text_id: text_id.to_string(),
        instance: instance.map(|b| b.id.clone()),
        speaker: instance
            .and_then(|b| identities.get(&b.id))
            .map_or(Speaker::Unknown, Identity::as_speaker),
        method,
    }
}

/// Each text goes to the nearest character instance on the page.
pub fn short_distance(scene: &SceneGraph, identities: &Identities, metric: DistanceMetric) -> Vec<SpeakerPrediction> {
    scene
        .texts
        .iter()
        .map(|t| predict(&t.id, nearest(&t.bbox, scene.chars.iter(), metric), identities, Method::RuleShort))
        .collect()
}

/// Nearest character inside the text's frame. An empty frame falls back to
/// the previous frame in reading order, then the next one, then the whole
/// page. With at most one frame the rule reduces to [`short_distance`].
pub fn frame_distance(
    scene: &SceneGraph,
    seq: &FrameSequence,
    identities: &Identities,
    metric: DistanceMetric,
) -> Vec<SpeakerPrediction> {
    let units: Vec<&ElementId> = seq.units().collect();
    if units.len() <= 1 {
        return short_distance(scene, identities, metric)
            .into_iter()
            .map(|p| SpeakerPrediction { method: Method::RuleFrame, ..p })
            .collect();
    }
    fn in_frame<'a>(
        scene: &'a SceneGraph,
        seq: &'a FrameSequence,
        frame: Option<&'a ElementId>,
    ) -> impl Iterator<Item = &'a Body> {
        scene.chars.iter().filter(move |c| seq.frame_of(&c.id) == frame)
    }

    scene
        .texts
        .iter()
        .map(|t| {
            let frame = seq.frame_of(&t.id);
            let mut chosen = nearest(&t.bbox, in_frame(scene, seq, frame), metric);
            if chosen.is_none() {
                if let Some(pos) = frame.and_then(|f| units.iter().position(|u| *u == f)) {
                    let prev = pos.checked_sub(1).map(|i| units[i]);
                    let next = units.get(pos + 1).copied();
                    chosen = prev
                        .and_then(|f| nearest(&t.bbox, in_frame(scene, seq, Some(f)), metric))
                        .or_else(|| next.and_then(|f| nearest(&t.bbox, in_frame(scene, seq, Some(f)), metric)));
                }
            }
            let chosen = chosen.or_else(|| nearest(&t.bbox, scene.chars.iter(), metric));
            predict(&t.id, chosen, identities, Method::RuleFrame)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Frame, TextRegion};
    use crate::layout::{analyze, LayoutConfig};

    fn b(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn body(id: &str, bbox: BBox, character: &str) -> Body {
        Body { id: id.into(), bbox, character: character.into() }
    }

    fn text(id: &str, bbox: BBox) -> TextRegion {
        TextRegion { id: id.into(), bbox, content: String::new() }
    }

    fn gold(scene: &SceneGraph) -> Identities {
        scene.chars.iter().map(|c| (c.id.clone(), Identity::Character(c.character.clone()))).collect()
    }

    fn scene(frames: Vec<Frame>, texts: Vec<TextRegion>, chars: Vec<Body>) -> SceneGraph {
        SceneGraph {
            title_id: "T".into(),
            page_index: 0,
            region: 0,
            bounds: b(0, 0, 1000, 1000),
            frames,
            texts,
            chars,
            faces: vec![],
        }
    }

    #[test]
    fn single_char_and_nearest() {
        // Text center (100,100); chars centered at (110,100) and (300,100).
        let s = scene(
            vec![],
            vec![text("t", b(90, 90, 110, 110))],
            vec![body("far", b(290, 90, 310, 110), "B"), body("near", b(100, 90, 120, 110), "A")],
        );
        let p = short_distance(&s, &gold(&s), DistanceMetric::Center);
        assert_eq!(p[0].instance.as_deref(), Some("near"));
        assert_eq!(p[0].speaker, Speaker::Known("A".into()));
    }

    #[test]
    fn ties_prefer_smaller_instance_id() {
        // Text center (110,110); both chars are exactly 100 away.
        let s = scene(
            vec![],
            vec![text("t", b(100, 100, 120, 120))],
            vec![body("z", b(200, 100, 220, 120), "B"), body("a", b(0, 100, 20, 120), "A")],
        );
        let p = short_distance(&s, &gold(&s), DistanceMetric::Center);
        assert_eq!(p[0].instance.as_deref(), Some("a"));
    }

    #[test]
    fn no_characters_abstains() {
        let s = scene(vec![], vec![text("t", b(0, 0, 10, 10))], vec![]);
        for p in short_distance(&s, &Identities::new(), DistanceMetric::Center) {
            assert_eq!((p.instance, p.speaker), (None, Speaker::Unknown));
        }
        let seq = analyze(&s, &LayoutConfig::default());
        assert_eq!(frame_distance(&s, &seq, &Identities::new(), DistanceMetric::Center)[0].speaker, Speaker::Unknown);
    }

    fn two_frames(chars: Vec<Body>) -> SceneGraph {
        scene(
            vec![
                Frame { id: "f1".into(), bbox: b(500, 0, 1000, 400) },
                Frame { id: "f2".into(), bbox: b(0, 0, 480, 400) },
            ],
            vec![text("t", b(500, 100, 560, 160))],
            chars,
        )
    }

    #[test]
    fn frame_restriction_dominates_distance() {
        let s = two_frames(vec![body("a", b(900, 100, 990, 390), "A"), body("b", b(400, 100, 470, 390), "B")]);
        let seq = analyze(&s, &LayoutConfig::default());
        assert_eq!(short_distance(&s, &gold(&s), DistanceMetric::Center)[0].speaker, Speaker::Known("B".into()));
        assert_eq!(frame_distance(&s, &seq, &gold(&s), DistanceMetric::Center)[0].speaker, Speaker::Known("A".into()));
    }

    #[test]
    fn empty_frame_falls_back_to_previous_then_next() {
        // Reading order: f0 (right), f1 (middle), f2 (left). Text sits in the empty f1.
        let s = scene(
            vec![
                Frame { id: "f0".into(), bbox: b(700, 0, 1000, 400) },
                Frame { id: "f1".into(), bbox: b(350, 0, 650, 400) },
                Frame { id: "f2".into(), bbox: b(0, 0, 300, 400) },
            ],
            vec![text("t", b(400, 100, 460, 160))],
            vec![body("c", b(900, 100, 990, 390), "C"), body("d", b(200, 100, 290, 390), "D")],
        );
        let seq = analyze(&s, &LayoutConfig::default());
        assert_eq!(seq.units().cloned().collect::<Vec<_>>(), ["f0", "f1", "f2"]);
        let p = frame_distance(&s, &seq, &gold(&s), DistanceMetric::Center);
        assert_eq!(p[0].speaker, Speaker::Known("C".into()));

        let mut s2 = s.clone();
        s2.chars.retain(|c| c.id == "d");
        let p = frame_distance(&s2, &seq, &gold(&s2), DistanceMetric::Center);
        assert_eq!(p[0].speaker, Speaker::Known("D".into()));
    }

    #[test]
    fn others_identity_becomes_unknown() {
        let s = two_frames(vec![body("a", b(900, 100, 990, 390), "A")]);
        let ids: Identities = [("a".to_string(), Identity::Others)].into();
        assert_eq!(short_distance(&s, &ids, DistanceMetric::Center)[0].speaker, Speaker::Unknown);
    }

    #[test]
    fn edge_metric_prefers_touching_boxes() {
        let s = scene(
            vec![],
            vec![text("t", b(100, 100, 200, 200))],
            vec![body("big", b(200, 0, 900, 900), "A"), body("small", b(60, 140, 90, 160), "B")],
        );
        assert_eq!(short_distance(&s, &gold(&s), DistanceMetric::Center)[0].instance.as_deref(), Some("small"));
        assert_eq!(short_distance(&s, &gold(&s), DistanceMetric::Edge)[0].instance.as_deref(), Some("big"));
    }
}
