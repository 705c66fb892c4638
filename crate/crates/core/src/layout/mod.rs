//! Page layout: spread splitting, frame reading order, element-to-frame
//! assignment and the easy/hard difficulty split.

mod assign;
mod order;
mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{Body, ElementId, Face, Frame, TextRegion};
use crate::geometry::BBox;

pub use assign::{assign_elements, classify_case, CaseDifficulty};
pub use order::{order_frames, FrameOrder};
pub use split::split_spread;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    TwoPage,
    FourKoma,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadingDirection {
    /// Right-to-left, the manga convention.
    #[default]
    Rtl,
    Ltr,
}

pub const DEFAULT_MERGE_IOU: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub reading_direction: ReadingDirection,
    pub merge_iou: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            reading_direction: ReadingDirection::Rtl,
            merge_iou: DEFAULT_MERGE_IOU,
        }
    }
}

/// The visual elements of one reading region (a page, half a spread, or a 4-koma strip).
///
/// `chars` are character body instances; they keep their annotated identity so
/// oracle backends and difficulty classification can consult it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub title_id: String,
    pub page_index: u32,
    pub region: usize,
    pub bounds: BBox,
    pub frames: Vec<Frame>,
    pub texts: Vec<TextRegion>,
    pub chars: Vec<Body>,
    pub faces: Vec<Face>,
}

impl SceneGraph {
    pub fn n_text(&self) -> usize {
        self.texts.len()
    }

    pub fn n_char(&self) -> usize {
        self.chars.len()
    }

    pub fn text(&self, id: &str) -> Option<&TextRegion> {
        self.texts.iter().find(|t| t.id == id)
    }

    pub fn char_instance(&self, id: &str) -> Option<&Body> {
        self.chars.iter().find(|c| c.id == id)
    }

    /// Stable identifier used for seeding and cassette keys.
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.title_id, self.page_index, self.region)
    }
}

/// Reading-ordered frames plus the frame each text and character falls into.
///
/// Frames merged during ordering stay in `ordered_frames` next to their
/// representative; `merged_into` maps them to it, and `assignment` only ever
/// names representatives. `None` in `assignment` means unassigned.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameSequence {
    pub ordered_frames: Vec<ElementId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub merged_into: BTreeMap<ElementId, ElementId>,
    pub assignment: BTreeMap<ElementId, Option<ElementId>>,
}

impl FrameSequence {
    /// Representative frames in reading order.
    pub fn units(&self) -> impl Iterator<Item = &ElementId> {
        self.ordered_frames.iter().filter(|f| !self.merged_into.contains_key(*f))
    }

    pub fn frame_of(&self, element: &str) -> Option<&ElementId> {
        self.assignment.get(element).and_then(Option::as_ref)
    }

    pub fn is_assigned(&self, element: &str) -> bool {
        self.assignment.contains_key(element)
    }
}

/// One region's layout as persisted in the page dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLayout {
    pub region: usize,
    pub frame_sequence: FrameSequence,
}

/// Orders and assigns one scene in a single call.
pub fn analyze(scene: &SceneGraph, config: &LayoutConfig) -> FrameSequence {
    let order = order_frames(scene, config);
    assign_elements(scene, &order)
}
