use super::{ReadingDirection, SceneGraph, SplitMode};
use crate::annotation::PageAnnotation;
use crate::geometry::BBox;

/// Splits a scanned image into its reading regions, first region first.
///
/// Each element goes to the strip it overlaps most horizontally; equal
/// overlaps go to the strip nearest the element's center, then to the strip
/// read first.
pub fn split_spread(page: &PageAnnotation, mode: SplitMode, direction: ReadingDirection) -> Vec<SceneGraph> {
    let strips = match mode {
        SplitMode::None => 1,
        SplitMode::TwoPage => 2,
        SplitMode::FourKoma => 4,
    };
    let width = f64::from(page.width.max(1));
    let step = width / strips as f64;
    // Strip intervals in reading order.
    let mut intervals: Vec<(f64, f64)> = (0..strips)
        .map(|i| (step * i as f64, if i + 1 == strips { width } else { step * (i + 1) as f64 }))
        .collect();
    if direction == ReadingDirection::Rtl {
        intervals.reverse();
    }

    let mut scenes: Vec<SceneGraph> = intervals
        .iter()
        .enumerate()
        .map(|(region, &(lo, hi))| SceneGraph {
            title_id: page.title_id.clone(),
            page_index: page.page_index,
            region,
            bounds: BBox::new(
                lo.floor() as u32,
                0,
                (hi.ceil() as u32).max(lo.floor() as u32 + 1),
                page.height.max(1),
            )
            .expect("strip has positive width and height"),
            frames: Vec::new(),
            texts: Vec::new(),
            chars: Vec::new(),
            faces: Vec::new(),
        })
        .collect();

    let pick = |bbox: &BBox| -> usize {
        let (cx, _) = bbox.center();
        let mut best = 0;
        let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            let overlap = bbox.horizontal_overlap(lo, hi);
            let center_gap = if cx < lo { lo - cx } else if cx > hi { cx - hi } else { 0.0 };
            let key = (overlap, -center_gap);
            if key > best_key {
                best_key = key;
                best = i;
            }
        }
        best
    };

    for f in &page.frames {
        scenes[pick(&f.bbox)].frames.push(f.clone());
    }
    for t in &page.texts {
        scenes[pick(&t.bbox)].texts.push(t.clone());
    }
    for b in &page.bodies {
        scenes[pick(&b.bbox)].chars.push(b.clone());
    }
    for f in &page.faces {
        scenes[pick(&f.bbox)].faces.push(f.clone());
    }
    scenes
}
