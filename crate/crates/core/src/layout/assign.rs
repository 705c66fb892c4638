use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FrameOrder, FrameSequence, SceneGraph};
use crate::error::ArgumentError;
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseDifficulty {
    Easy,
    Hard,
}

/// Puts each text and character into the frame containing its box center.
///
/// When several frames contain the center, the one with the larger
/// intersection wins, then the one read first. Merged frames resolve to their
/// representative.
pub fn assign_elements(scene: &SceneGraph, order: &FrameOrder) -> FrameSequence {
    let rank: BTreeMap<&str, usize> = order
        .ordered_frames
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let locate = |bbox: &BBox| -> Option<String> {
        let center = bbox.center();
        scene
            .frames
            .iter()
            .filter(|f| f.bbox.contains_point(center))
            .max_by(|a, b| {
                let ra = rank.get(a.id.as_str()).copied().unwrap_or(usize::MAX);
                let rb = rank.get(b.id.as_str()).copied().unwrap_or(usize::MAX);
                a.bbox
                    .intersection_area(bbox)
                    .cmp(&b.bbox.intersection_area(bbox))
                    .then(rb.cmp(&ra))
            })
            .map(|f| order.merged_into.get(&f.id).unwrap_or(&f.id).clone())
    };

    let mut assignment = BTreeMap::new();
    for t in &scene.texts {
        assignment.insert(t.id.clone(), locate(&t.bbox));
    }
    for c in &scene.chars {
        assignment.insert(c.id.clone(), locate(&c.bbox));
    }
    FrameSequence {
        ordered_frames: order.ordered_frames.clone(),
        merged_into: order.merged_into.clone(),
        assignment,
    }
}

/// Easy when a body of the gold speaker shares the text's frame. Unassigned
/// elements share a single pseudo-frame.
pub fn classify_case(
    text_id: &str,
    gt_speaker: &str,
    scene: &SceneGraph,
    seq: &FrameSequence,
) -> Result<CaseDifficulty, ArgumentError> {
    if scene.text(text_id).is_none() || !seq.is_assigned(text_id) {
        return Err(ArgumentError(format!("text {text_id} is not part of this scene")));
    }
    let text_frame = seq.frame_of(text_id);
    let together = scene
        .chars
        .iter()
        .filter(|c| c.character == gt_speaker)
        .any(|c| seq.is_assigned(&c.id) && seq.frame_of(&c.id) == text_frame);
    Ok(if together { CaseDifficulty::Easy } else { CaseDifficulty::Hard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Body, Frame, TextRegion};
    use crate::layout::{order_frames, LayoutConfig};

    fn b(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn scene() -> SceneGraph {
        SceneGraph {
            title_id: "T".into(),
            page_index: 0,
            region: 0,
            bounds: b(0, 0, 1000, 1000),
            frames: vec![
                Frame { id: "f1".into(), bbox: b(500, 0, 1000, 400) },
                Frame { id: "f2".into(), bbox: b(0, 0, 480, 400) },
                Frame { id: "f3".into(), bbox: b(0, 420, 1000, 900) },
            ],
            texts: vec![
                TextRegion { id: "t1".into(), bbox: b(600, 50, 700, 150), content: "a".into() },
                TextRegion { id: "t2".into(), bbox: b(100, 50, 200, 150), content: "b".into() },
                TextRegion { id: "t3".into(), bbox: b(100, 950, 200, 990), content: "c".into() },
            ],
            chars: vec![
                Body { id: "c1".into(), bbox: b(800, 100, 900, 380), character: "A".into() },
                Body { id: "c2".into(), bbox: b(100, 500, 300, 880), character: "B".into() },
                Body { id: "c3".into(), bbox: b(400, 905, 500, 1000), character: "C".into() },
            ],
            faces: vec![],
        }
    }

    fn seq(s: &SceneGraph) -> FrameSequence {
        assign_elements(s, &order_frames(s, &LayoutConfig::default()))
    }

    #[test]
    fn centers_pick_frames() {
        let s = scene();
        let q = seq(&s);
        assert_eq!(q.frame_of("t2").map(String::as_str), Some("f2"));
        assert_eq!(q.frame_of("c2").map(String::as_str), Some("f3"));
        assert_eq!(q.frame_of("c3"), None);
        assert!(q.is_assigned("c3"));
        assert_eq!(q.assignment.len(), 6);
    }

    #[test]
    fn larger_intersection_wins() {
        // The text's center (100, 100) lies in both frames; intersections are 1200 and 800.
        let mut s = scene();
        s.frames = vec![
            Frame { id: "wide".into(), bbox: b(60, 60, 120, 110) },
            Frame { id: "low".into(), bbox: b(80, 100, 300, 300) },
        ];
        s.texts = vec![TextRegion { id: "t".into(), bbox: b(80, 80, 120, 120), content: String::new() }];
        let areas: Vec<u64> = s.frames.iter().map(|f| f.bbox.intersection_area(&s.texts[0].bbox)).collect();
        assert_eq!(areas, [1200, 800]);
        // "low" is read first so only the area rule can pick "wide".
        let order = FrameOrder { ordered_frames: vec!["low".into(), "wide".into()], ..Default::default() };
        let q = assign_elements(&s, &order);
        assert_eq!(q.frame_of("t").map(String::as_str), Some("wide"));
    }

    #[test]
    fn difficulty() {
        let mut s = scene();
        let q = seq(&s);
        assert_eq!(classify_case("t1", "A", &s, &q).unwrap(), CaseDifficulty::Easy);
        assert_eq!(classify_case("t2", "B", &s, &q).unwrap(), CaseDifficulty::Hard);
        assert_eq!(classify_case("t3", "C", &s, &q).unwrap(), CaseDifficulty::Easy);
        assert!(classify_case("nope", "A", &s, &q).is_err());
        s.chars.clear();
        assert_eq!(classify_case("t1", "A", &s, &seq(&s)).unwrap(), CaseDifficulty::Hard);
    }
}
