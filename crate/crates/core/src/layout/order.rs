//! Recursive-cut reading order over frame boxes.
//!
//! Frames whose IoU reaches the merge threshold are first fused into their
//! bounding union. The remaining units are then split recursively: by the
//! widest horizontal gap when one exists (upper group first), otherwise by the
//! widest vertical gap (right group first for right-to-left reading). A group
//! with no gap on either axis is ordered by top edge, then by the edge that
//! is read first.

use std::collections::BTreeMap;

use super::{LayoutConfig, ReadingDirection, SceneGraph};
use crate::annotation::ElementId;
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameOrder {
    pub ordered_frames: Vec<ElementId>,
    /// Non-representative frame id → the representative of its merged group.
    pub merged_into: BTreeMap<ElementId, ElementId>,
}

#[derive(Debug, Clone)]
struct Unit {
    bbox: BBox,
    /// Sorted; the first member represents the group.
    members: Vec<ElementId>,
}

impl Unit {
    fn id(&self) -> &str {
        &self.members[0]
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn span(b: &BBox, axis: Axis) -> (u32, u32) {
    match axis {
        Axis::X => (b.xmin(), b.xmax()),
        Axis::Y => (b.ymin(), b.ymax()),
    }
}

fn merge(frames: impl Iterator<Item = (ElementId, BBox)>, threshold: f64) -> Vec<Unit> {
    let mut units: Vec<Unit> = frames.map(|(id, bbox)| Unit { bbox, members: vec![id] }).collect();
    units.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    'restart: loop {
        for i in 0..units.len() {
            for j in i + 1..units.len() {
                if units[i].bbox.iou(&units[j].bbox) >= threshold {
                    let absorbed = units.remove(j);
                    let unit = &mut units[i];
                    unit.bbox = unit.bbox.union(&absorbed.bbox);
                    unit.members.extend(absorbed.members);
                    unit.members.sort();
                    continue 'restart;
                }
            }
        }
        return units;
    }
}

/// Widest gap along `axis`: (units before, units after). Ties keep the lowest coordinate.
fn split_widest(units: &[Unit], axis: Axis) -> Option<(Vec<Unit>, Vec<Unit>)> {
    let mut sorted: Vec<&Unit> = units.iter().collect();
    sorted.sort_by(|a, b| span(&a.bbox, axis).0.cmp(&span(&b.bbox, axis).0).then_with(|| a.id().cmp(b.id())));
    let mut best: Option<(u32, usize)> = None;
    let mut reach = span(&sorted[0].bbox, axis).1;
    for (k, unit) in sorted.iter().enumerate().skip(1) {
        let (start, end) = span(&unit.bbox, axis);
        if start >= reach {
            let gap = start - reach;
            if best.is_none_or(|(w, _)| gap > w) {
                best = Some((gap, k));
            }
        }
        reach = reach.max(end);
    }
    let (_, k) = best?;
    let before = sorted[..k].iter().map(|u| (*u).clone()).collect();
    let after = sorted[k..].iter().map(|u| (*u).clone()).collect();
    Some((before, after))
}

fn cut(units: Vec<Unit>, direction: ReadingDirection, out: &mut Vec<Unit>) {
    if units.len() <= 1 {
        out.extend(units);
        return;
    }
    if let Some((top, bottom)) = split_widest(&units, Axis::Y) {
        cut(top, direction, out);
        cut(bottom, direction, out);
        return;
    }
    if let Some((left, right)) = split_widest(&units, Axis::X) {
        let (first, second) = match direction {
            ReadingDirection::Rtl => (right, left),
            ReadingDirection::Ltr => (left, right),
        };
        cut(first, direction, out);
        cut(second, direction, out);
        return;
    }
    let mut units = units;
    units.sort_by(|a, b| {
        let lead = match direction {
            ReadingDirection::Rtl => b.bbox.xmax().cmp(&a.bbox.xmax()),
            ReadingDirection::Ltr => a.bbox.xmin().cmp(&b.bbox.xmin()),
        };
        a.bbox.ymin().cmp(&b.bbox.ymin()).then(lead).then_with(|| a.id().cmp(b.id()))
    });
    out.extend(units);
}

/// Reading order of the scene's frames. The result is a permutation of the frame ids.
pub fn order_frames(scene: &SceneGraph, config: &LayoutConfig) -> FrameOrder {
    if scene.frames.is_empty() {
        return FrameOrder::default();
    }
    let units = merge(scene.frames.iter().map(|f| (f.id.clone(), f.bbox)), config.merge_iou);
    let mut ordered = Vec::with_capacity(units.len());
    cut(units, config.reading_direction, &mut ordered);

    let mut order = FrameOrder::default();
    for unit in ordered {
        let rep = unit.members[0].clone();
        for m in unit.members {
            if m != rep {
                order.merged_into.insert(m.clone(), rep.clone());
            }
            order.ordered_frames.push(m);
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Frame;

    fn scene(frames: &[(&str, [u32; 4])]) -> SceneGraph {
        SceneGraph {
            title_id: "T".into(),
            page_index: 0,
            region: 0,
            bounds: BBox::new(0, 0, 2000, 2000).unwrap(),
            frames: frames
                .iter()
                .map(|(id, b)| Frame { id: id.to_string(), bbox: BBox::try_from(*b).unwrap() })
                .collect(),
            texts: vec![],
            chars: vec![],
            faces: vec![],
        }
    }

    fn order(s: &SceneGraph) -> Vec<String> {
        order_frames(s, &LayoutConfig::default()).ordered_frames
    }

    #[test]
    fn empty_and_single() {
        assert!(order(&scene(&[])).is_empty());
        assert_eq!(order(&scene(&[("f1", [0, 0, 10, 10])])), ["f1"]);
    }

    #[test]
    fn grid_reads_right_to_left_top_to_bottom() {
        let s = scene(&[
            ("bl", [0, 110, 100, 200]),
            ("tl", [0, 0, 100, 100]),
            ("br", [110, 110, 200, 200]),
            ("tr", [110, 0, 200, 100]),
        ]);
        assert_eq!(order(&s), ["tr", "tl", "br", "bl"]);
        let ltr = LayoutConfig { reading_direction: ReadingDirection::Ltr, ..LayoutConfig::default() };
        assert_eq!(order_frames(&s, &ltr).ordered_frames, ["tl", "tr", "bl", "br"]);
    }

    #[test]
    fn tall_right_panel_reads_before_stacked_left_column() {
        let s = scene(&[
            ("tall", [110, 0, 200, 200]),
            ("top_left", [0, 0, 100, 95]),
            ("bottom_left", [0, 105, 100, 200]),
        ]);
        assert_eq!(order(&s), ["tall", "top_left", "bottom_left"]);
    }

    #[test]
    fn overlapping_frames_merge() {
        let s = scene(&[("b", [0, 0, 100, 100]), ("a", [10, 0, 110, 100]), ("c", [0, 200, 100, 300])]);
        let o = order_frames(&s, &LayoutConfig::default());
        assert_eq!(o.ordered_frames, ["a", "b", "c"]);
        assert_eq!(o.merged_into.get("b").map(String::as_str), Some("a"));
    }

    #[test]
    fn interlocking_frames_fall_back_to_position_sort() {
        // Pinwheel: no full horizontal or vertical gap anywhere.
        let s = scene(&[
            ("a", [0, 0, 140, 60]),
            ("b", [150, 0, 200, 140]),
            ("c", [60, 150, 200, 200]),
            ("d", [0, 70, 50, 200]),
            ("e", [60, 70, 140, 140]),
        ]);
        assert_eq!(order(&s), ["b", "a", "e", "d", "c"]);
    }
}
