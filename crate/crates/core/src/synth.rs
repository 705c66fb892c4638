//! Seeded synthetic comic titles for tests, demos and fixtures.
//!
//! Pages are grids of rectangular frames. Each frame holds one character body
//! (with a face carrying an emotion label) and one or two vertical speech
//! balloons. Balloons are spoken by the frame's own character, except for a
//! configurable share spoken by a character standing in a different frame of
//! the same region, which is what makes a case hard.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::annotation::{
    Body, Character, Emotion, Face, Frame, PageAnnotation, SpeakerLink, TextRegion, TitleCorpus,
};
use crate::geometry::BBox;
use crate::seed::derive_rng;

/// Width of a single page; spreads are twice as wide.
pub const PAGE_WIDTH: u32 = 827;
pub const PAGE_HEIGHT: u32 = 1170;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub pages: usize,
    /// Two pages per image, split down the middle.
    pub spread: bool,
    /// Share of balloons whose speaker stands in another frame.
    pub hard_rate: f64,
    /// Add an unlinked caption outside every frame on each region.
    pub captions: bool,
    pub roster: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { pages: 10, spread: true, hard_rate: 0.0, captions: false, roster: 4, seed: 0 }
    }
}

const NAMES: [&str; 8] = ["Aki", "Ben", "Chiyo", "Daichi", "Emi", "Fumio", "Gen", "Hana"];

const LINES: [&str; 12] = [
    "おはよう！",
    "ちょっと待って",
    "本当に？",
    "やった！",
    "どうしよう…",
    "ふざけるな！",
    "ありがとう",
    "えっ？",
    "行こう",
    "そんな…",
    "大丈夫だよ",
    "静かに！",
];

/// Label mix loosely shaped like real face annotations: mostly neutral and happy.
const EMOTION_WEIGHTS: [(Emotion, u32); 7] = [
    (Emotion::Neutral, 35),
    (Emotion::Surprise, 8),
    (Emotion::Anger, 15),
    (Emotion::Happiness, 30),
    (Emotion::Sadness, 8),
    (Emotion::Disgust, 2),
    (Emotion::Fear, 2),
];

struct Ids(u32);

impl Ids {
    fn next(&mut self) -> String {
        self.0 += 1;
        format!("{:08x}", self.0)
    }
}

fn bbox(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
    BBox::new(x0, y0, x1, y1).expect("generator boxes are non-degenerate")
}

fn emotion(rng: &mut ChaCha8Rng) -> Emotion {
    EMOTION_WEIGHTS
        .choose_weighted(rng, |(_, w)| *w)
        .map(|(e, _)| *e)
        .expect("weights are positive")
}

/// A character drawn with weight 1/(rank+1), so the first few dominate.
fn character(rng: &mut ChaCha8Rng, roster: &[Character]) -> String {
    let ranked: Vec<(usize, &Character)> = roster.iter().enumerate().collect();
    ranked
        .choose_weighted(rng, |(i, _)| 1.0 / (*i as f64 + 1.0))
        .map(|(_, c)| c.id.clone())
        .expect("roster is not empty")
}

/// Rows of frames inside `[x0, x1) × [0, PAGE_HEIGHT)`.
fn frame_grid(rng: &mut ChaCha8Rng, x0: u32, x1: u32) -> Vec<BBox> {
    let margin = 20;
    let gutter = 12;
    let rows = rng.gen_range(2..=3u32);
    let row_h = (PAGE_HEIGHT - 2 * margin - (rows - 1) * gutter) / rows;
    let mut out = Vec::new();
    for r in 0..rows {
        let y0 = margin + r * (row_h + gutter);
        let cols = rng.gen_range(1..=2u32);
        let inner = x1 - x0 - 2 * margin;
        let split = if cols == 2 { rng.gen_range(inner * 2 / 5..=inner * 3 / 5) } else { inner };
        let mut left = x0 + margin;
        for c in 0..cols {
            let right = if c + 1 == cols { x1 - margin } else { left + split - gutter / 2 };
            out.push(bbox(left, y0, right, y0 + row_h));
            left = right + gutter;
        }
    }
    out
}

struct Region {
    frames: Vec<(Frame, Body)>,
}

/// Builds one title. Identical parameters always give identical output.
pub fn synth_title(title: &str, params: &SynthParams) -> TitleCorpus {
    let mut rng = derive_rng(params.seed, &["synth", title]);
    let roster: Vec<Character> = (0..params.roster.max(1))
        .map(|i| Character {
            id: format!("c{i:02}"),
            name: NAMES.get(i).map_or_else(|| format!("Extra {i}"), |n| n.to_string()),
        })
        .collect();
    let mut ids = Ids(0);
    let mut pages = Vec::new();
    let mut links = Vec::new();
    let halves = if params.spread { 2 } else { 1 };

    for index in 0..params.pages {
        let width = PAGE_WIDTH * halves;
        let mut page = PageAnnotation {
            title_id: title.to_string(),
            page_index: index as u32,
            width,
            height: PAGE_HEIGHT,
            frames: Vec::new(),
            texts: Vec::new(),
            bodies: Vec::new(),
            faces: Vec::new(),
        };
        // Right half first, the way the page is read.
        for half in (0..halves).rev() {
            let x0 = half * PAGE_WIDTH;
            let mut region = Region { frames: Vec::new() };
            for fb in frame_grid(&mut rng, x0, x0 + PAGE_WIDTH) {
                let frame = Frame { id: ids.next(), bbox: fb };
                let fw = fb.width();
                let fh = fb.height();
                let body_w = fw * rng.gen_range(25..=35) / 100;
                let body_h = fh * rng.gen_range(55..=80) / 100;
                let on_left = rng.gen_bool(0.5);
                let bx0 = if on_left { fb.xmin() + fw / 10 } else { fb.xmax() - fw / 10 - body_w };
                let by1 = fb.ymax() - 8;
                let body_box = bbox(bx0, by1 - body_h, bx0 + body_w, by1);
                let body = Body { id: ids.next(), bbox: body_box, character: character(&mut rng, &roster) };
                let face_side = body_w * 3 / 5;
                let fx0 = bx0 + (body_w - face_side) / 2;
                let fy0 = body_box.ymin() + 6;
                page.faces.push(Face {
                    id: ids.next(),
                    bbox: bbox(fx0, fy0, fx0 + face_side, fy0 + face_side),
                    character: body.character.clone(),
                    emotion: Some(emotion(&mut rng)),
                });
                page.frames.push(frame.clone());
                page.bodies.push(body.clone());
                region.frames.push((frame, body));
            }

            for (k, (frame, body)) in region.frames.iter().enumerate() {
                let fb = frame.bbox;
                let balloons = rng.gen_range(1..=2u32);
                // The half of the frame the body does not occupy.
                let body_left = body.bbox.center().0 < fb.center().0;
                let (lane0, lane1) = if body_left {
                    (fb.center().0 as u32 + 4, fb.xmax() - 8)
                } else {
                    (fb.xmin() + 8, fb.center().0 as u32 - 4)
                };
                let lane_w = (lane1 - lane0) / balloons;
                for b in 0..balloons {
                    let w = (lane_w * 7 / 10).clamp(24, 70);
                    let h = (fb.height() * rng.gen_range(30..=55) / 100).max(30);
                    let tx0 = lane0 + b * lane_w + (lane_w - w) / 2;
                    let ty0 = fb.ymin() + 10;
                    let text = TextRegion {
                        id: ids.next(),
                        bbox: bbox(tx0, ty0, tx0 + w, (ty0 + h).min(fb.ymax() - 4)),
                        content: LINES[rng.gen_range(0..LINES.len())].to_string(),
                    };
                    let others: Vec<&Body> = region
                        .frames
                        .iter()
                        .enumerate()
                        .filter(|(j, (_, other))| *j != k && other.character != body.character)
                        .map(|(_, (_, other))| other)
                        .collect();
                    let speaker = if !others.is_empty() && rng.gen_bool(params.hard_rate) {
                        others[rng.gen_range(0..others.len())].character.clone()
                    } else {
                        body.character.clone()
                    };
                    links.push(SpeakerLink {
                        title_id: title.to_string(),
                        text_element_id: text.id.clone(),
                        speaker_character_id: speaker,
                    });
                    page.texts.push(text);
                }
            }
            if params.captions {
                let cx0 = x0 + PAGE_WIDTH / 2 - 60;
                page.texts.push(TextRegion {
                    id: ids.next(),
                    bbox: bbox(cx0, PAGE_HEIGHT - 18, cx0 + 120, PAGE_HEIGHT - 4),
                    content: format!("（{}）", index + 1),
                });
            }
        }
        pages.push(page);
    }

    TitleCorpus { title_id: title.to_string(), characters: roster, pages, speaker_links: links, warnings: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let p = SynthParams { hard_rate: 0.3, captions: true, ..SynthParams::default() };
        let a = synth_title("T", &p);
        assert_eq!(a, synth_title("T", &p));
        assert_ne!(a, synth_title("U", &p).clone_with_title("T"));
        for page in &a.pages {
            for t in &page.texts {
                assert!(t.bbox.xmax() <= page.width && t.bbox.ymax() <= page.height);
            }
            for f in &page.faces {
                let body = page.bodies.iter().find(|b| b.character == f.character && b.bbox.contains_point(f.bbox.center()));
                assert!(body.is_some());
            }
        }
        let linked = a.speaker_links.len();
        let texts: usize = a.pages.iter().map(|p| p.texts.len()).sum();
        assert_eq!(linked + 2 * a.pages.len(), texts);
    }

    trait Retitle {
        fn clone_with_title(&self, t: &str) -> TitleCorpus;
    }

    impl Retitle for TitleCorpus {
        fn clone_with_title(&self, t: &str) -> TitleCorpus {
            let mut c = self.clone();
            c.title_id = t.into();
            for p in &mut c.pages {
                p.title_id = t.into();
            }
            for l in &mut c.speaker_links {
                l.title_id = t.into();
            }
            c
        }
    }
}
