//! Page prompt rendering.
//!
//! The prompt is a pure function of its inputs: frames appear in reading
//! order with their texts and characters, then everything outside any frame,
//! then the memory, then the reply contract.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AttributionError, MemoryState, PageInputs};
use crate::annotation::{CharacterId, ElementId};
use crate::geometry::BBox;
use crate::labels::Identity;
use crate::layout::ReadingDirection;

/// Bumped whenever the rendered wording changes, so recorded responses are not
/// silently replayed against a different prompt.
pub const PROMPT_VERSION: &str = "page_prompt_v1";

/// Names the model may use for speakers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Roster {
    pub entries: Vec<(CharacterId, String)>,
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl Roster {
    pub fn new(entries: impl IntoIterator<Item = (CharacterId, String)>) -> Self {
        Self { entries: entries.into_iter().collect() }
    }

    pub fn name(&self, id: &str) -> Option<&str> {
        self.entries.iter().find(|(c, _)| c == id).map(|(_, n)| n.as_str())
    }

    /// Case-insensitive exact match on id or name, then the same with
    /// whitespace runs collapsed.
    pub fn resolve(&self, answer: &str) -> Option<&CharacterId> {
        let lower = answer.to_lowercase();
        let exact = self
            .entries
            .iter()
            .find(|(id, name)| id.to_lowercase() == lower || name.to_lowercase() == lower);
        exact
            .or_else(|| {
                let squashed = squash(answer);
                self.entries
                    .iter()
                    .find(|(id, name)| squash(id) == squashed || squash(name) == squashed)
            })
            .map(|(id, _)| id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameBlock {
    pub frame_id: ElementId,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PagePrompt {
    pub system_preamble: String,
    pub frame_blocks: Vec<FrameBlock>,
    pub unassigned_block: Vec<String>,
    pub memory_block: String,
    pub output_schema_instructions: String,
    /// Text ids in the order they appear above; the reply must cover all of them.
    pub text_order: Vec<ElementId>,
}

impl PagePrompt {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.system_preamble);
        out.push('\n');
        for (i, block) in self.frame_blocks.iter().enumerate() {
            let _ = writeln!(out, "FRAME {} [{}]", i + 1, block.frame_id);
            for line in &block.lines {
                let _ = writeln!(out, "  {line}");
            }
        }
        out.push_str("OUTSIDE ANY FRAME\n");
        if self.unassigned_block.is_empty() {
            out.push_str("  (nothing)\n");
        }
        for line in &self.unassigned_block {
            let _ = writeln!(out, "  {line}");
        }
        out.push('\n');
        out.push_str(&self.memory_block);
        out.push('\n');
        out.push_str(&self.output_schema_instructions);
        out
    }
}

fn bbox(b: &BBox) -> String {
    format!("[{},{},{},{}]", b.xmin(), b.ymin(), b.xmax(), b.ymax())
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Renders one page. Fails when the memory already exceeds its budgets.
pub fn build_prompt(inputs: &PageInputs<'_>, memory: &MemoryState) -> Result<PagePrompt, AttributionError> {
    memory.check()?;
    let scene = inputs.scene;
    let seq = inputs.seq;
    let show_intensity = inputs.intensities.is_some();

    let mut preamble = String::new();
    preamble.push_str(
        "You attribute comic dialogue to its speakers and label the emotion of each line.\n",
    );
    let _ = writeln!(
        preamble,
        "Panels are read {}, top to bottom. Boxes are [xmin,ymin,xmax,ymax] in page pixels.",
        match inputs.direction {
            ReadingDirection::Rtl => "right to left",
            ReadingDirection::Ltr => "left to right",
        }
    );
    if show_intensity {
        preamble.push_str(
            "Each character carries a facial expression intensity: STRONG (visible emotion) or NEUTRAL, with the raw score.\n",
        );
    }
    preamble.push_str("Main characters:\n");
    if inputs.roster.entries.is_empty() {
        preamble.push_str("- (none identified)\n");
    }
    for (id, name) in &inputs.roster.entries {
        let _ = writeln!(preamble, "- {id}: {name}");
    }
    preamble.push_str("Anyone else is shown as \"unknown person\".\n");
    let _ = writeln!(
        preamble,
        "PAGE {} image {} region {}",
        scene.title_id, scene.page_index, scene.region
    );

    // Element order inside a frame: the side read first, then top to bottom.
    let sort_key = |b: &BBox| -> (i64, u32) {
        match inputs.direction {
            ReadingDirection::Rtl => (-i64::from(b.xmax()), b.ymin()),
            ReadingDirection::Ltr => (i64::from(b.xmin()), b.ymin()),
        }
    };
    let mut texts: Vec<(usize, &crate::annotation::TextRegion)> = scene.texts.iter().enumerate().collect();
    texts.sort_by(|a, b| sort_key(&a.1.bbox).cmp(&sort_key(&b.1.bbox)).then_with(|| a.1.id.cmp(&b.1.id)));
    let mut chars: Vec<(usize, &crate::annotation::Body)> = scene.chars.iter().enumerate().collect();
    chars.sort_by(|a, b| sort_key(&a.1.bbox).cmp(&sort_key(&b.1.bbox)).then_with(|| a.1.id.cmp(&b.1.id)));

    let text_line = |i: usize, t: &crate::annotation::TextRegion| {
        let content = inputs.ocr.get(i).map(String::as_str).unwrap_or("");
        format!("TEXT {} at {}: {}", t.id, bbox(&t.bbox), quote(content))
    };
    let char_line = |i: usize, c: &crate::annotation::Body| {
        let who = match inputs.char_preds.get(i).map(|p| &p.predicted) {
            Some(Identity::Character(id)) => match inputs.roster.name(id) {
                Some(name) => format!("{name} ({id})"),
                None => id.clone(),
            },
            _ => "unknown person".to_string(),
        };
        let mut line = format!("CHARACTER {} at {}: {who}", c.id, bbox(&c.bbox));
        if let Some(z) = inputs.intensities.and_then(|v| v.get(i)) {
            let tag = if z.logit > 0.0 { "STRONG" } else { "NEUTRAL" };
            let _ = write!(line, "; expression {tag} ({:.1})", z.logit);
        }
        line
    };

    let mut frame_blocks = Vec::new();
    let mut text_order = Vec::new();
    for frame in seq.units() {
        let mut lines = Vec::new();
        for &(i, t) in texts.iter().filter(|(_, t)| seq.frame_of(&t.id) == Some(frame)) {
            lines.push(text_line(i, t));
            text_order.push(t.id.clone());
        }
        for &(i, c) in chars.iter().filter(|(_, c)| seq.frame_of(&c.id) == Some(frame)) {
            lines.push(char_line(i, c));
        }
        frame_blocks.push(FrameBlock { frame_id: frame.clone(), lines });
    }
    let mut unassigned_block = Vec::new();
    for &(i, t) in texts.iter().filter(|(_, t)| seq.frame_of(&t.id).is_none()) {
        unassigned_block.push(text_line(i, t));
        text_order.push(t.id.clone());
    }
    for &(i, c) in chars.iter().filter(|(_, c)| seq.frame_of(&c.id).is_none()) {
        unassigned_block.push(char_line(i, c));
    }

    let memory_block = format!(
        "STORY SO FAR\nGlobal plot summary: {}\nPrevious page summary: {}\n",
        if memory.global_summary.is_empty() { "(none yet)" } else { &memory.global_summary },
        if memory.local_summary.is_empty() { "(none)" } else { &memory.local_summary },
    );

    let mut schema = String::new();
    schema.push_str("REPLY FORMAT\nAnswer with exactly one JSON object and nothing else:\n");
    schema.push_str(
        "{\"attributions\": {\"<text id>\": {\"speaker\": \"<main character id or name, or unknown>\", \"emotion\": \"<label>\"}}, \"global_summary\": \"<plot so far>\", \"local_summary\": \"<this page>\"}\n",
    );
    schema.push_str("Labels: neutral, surprise, anger, happiness, sadness, disgust, fear.\n");
    let _ = writeln!(
        schema,
        "Keep global_summary under {} characters, oldest events first; keep local_summary under {} characters.",
        memory.global_budget, memory.local_budget
    );
    if text_order.is_empty() {
        schema.push_str("This page has no text; return an empty attributions object.\n");
    } else {
        let _ = writeln!(schema, "Text ids to cover: {}", text_order.join(", "));
    }

    Ok(PagePrompt {
        system_preamble: preamble,
        frame_blocks,
        unassigned_block,
        memory_block,
        output_schema_instructions: schema,
        text_order,
    })
}
