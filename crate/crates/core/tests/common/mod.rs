#![allow(dead_code)]

use std::path::{Path, PathBuf};

use panelvox::annotation::{Emotion, Frame};
use panelvox::attribution::{LlmError, LlmRequest, ScriptedBackend};
use panelvox::geometry::BBox;
use panelvox::layout::{ReadingDirection, SceneGraph};
use panelvox::pipeline::RunConfig;
use panelvox::seed::derive_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FIXTURE_TITLE: &str = "HoshinoKouen";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

/// The fixture run config with its output redirected.
pub fn fixture_config(output_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&fixtures().join("run.toml")).unwrap();
    cfg.output_dir = output_dir.to_path_buf();
    cfg
}

pub fn b(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
    BBox::new(x0, y0, x1, y1).unwrap()
}

pub fn frames_scene(frames: Vec<Frame>) -> SceneGraph {
    SceneGraph {
        title_id: "L".into(),
        page_index: 0,
        region: 0,
        bounds: b(0, 0, 1000, 1000),
        frames,
        texts: vec![],
        chars: vec![],
        faces: vec![],
    }
}

/// Frames that do not overlap (touching edges allowed) on a 1000×1000 page.
pub fn random_layout(rng: &mut ChaCha8Rng, n: usize) -> Vec<Frame> {
    let mut boxes: Vec<BBox> = Vec::new();
    while boxes.len() < n {
        let x0 = rng.gen_range(0..900u32);
        let y0 = rng.gen_range(0..900u32);
        let w = rng.gen_range(40..=300u32).min(1000 - x0);
        let h = rng.gen_range(40..=300u32).min(1000 - y0);
        let cand = b(x0, y0, x0 + w, y0 + h);
        if boxes.iter().all(|o| o.intersection_area(&cand) == 0) {
            boxes.push(cand);
        }
    }
    boxes.into_iter().enumerate().map(|(i, bbox)| Frame { id: format!("f{i}"), bbox }).collect()
}

/// Guillotine layouts: the page is cut recursively, like a real comic grid.
pub fn guillotine_layout(rng: &mut ChaCha8Rng, n: usize) -> Vec<Frame> {
    let mut cells = vec![b(0, 0, 1000, 1000)];
    while cells.len() < n {
        let i = rng.gen_range(0..cells.len());
        let c = cells[i];
        let horizontal = rng.gen_bool(0.5);
        let (lo, hi) = if horizontal { (c.ymin(), c.ymax()) } else { (c.xmin(), c.xmax()) };
        if hi - lo < 60 {
            continue;
        }
        let cut = rng.gen_range(lo + 20..hi - 20);
        let gutter = rng.gen_range(0..=10u32).min(cut - lo - 10);
        let (a, d) = if horizontal {
            (b(c.xmin(), c.ymin(), c.xmax(), cut - gutter), b(c.xmin(), cut, c.xmax(), c.ymax()))
        } else {
            (b(c.xmin(), c.ymin(), cut - gutter, c.ymax()), b(cut, c.ymin(), c.xmax(), c.ymax()))
        };
        cells.swap_remove(i);
        cells.push(a);
        cells.push(d);
    }
    cells.into_iter().enumerate().map(|(i, bbox)| Frame { id: format!("f{i}"), bbox }).collect()
}

/// A naive second implementation of the recursive-cut ordering.
///
/// Instead of sweeping sorted intervals it tries every integer cut position
/// on an axis, keeps those no frame straddles, and picks the partition with
/// the widest empty band (lowest band on ties). Frames here never overlap,
/// so no merge step is needed.
pub fn oracle_order(frames: &[Frame], direction: ReadingDirection) -> Vec<String> {
    fn lohi(f: &Frame, vertical_axis: bool) -> (u32, u32) {
        if vertical_axis {
            (f.bbox.ymin(), f.bbox.ymax())
        } else {
            (f.bbox.xmin(), f.bbox.xmax())
        }
    }

    fn best_cut(frames: &[&Frame], vertical_axis: bool) -> Option<(Vec<usize>, Vec<usize>)> {
        let lo = frames.iter().map(|f| lohi(f, vertical_axis).0).min()?;
        let hi = frames.iter().map(|f| lohi(f, vertical_axis).1).max()?;
        // (gap width, gap start, before, after)
        let mut best: Option<(u32, u32, Vec<usize>, Vec<usize>)> = None;
        for c in lo..=hi {
            let mut before = Vec::new();
            let mut after = Vec::new();
            let mut straddles = false;
            for (i, f) in frames.iter().enumerate() {
                let (a, z) = lohi(f, vertical_axis);
                if z <= c {
                    before.push(i);
                } else if a >= c {
                    after.push(i);
                } else {
                    straddles = true;
                }
            }
            if straddles || before.is_empty() || after.is_empty() {
                continue;
            }
            let start = before.iter().map(|&i| lohi(frames[i], vertical_axis).1).max().unwrap();
            let end = after.iter().map(|&i| lohi(frames[i], vertical_axis).0).min().unwrap();
            let width = end - start;
            let better = match &best {
                None => true,
                Some((w, s, _, _)) => width > *w || (width == *w && start < *s),
            };
            if better {
                best = Some((width, start, before, after));
            }
        }
        best.map(|(_, _, before, after)| (before, after))
    }

    fn go(frames: Vec<&Frame>, direction: ReadingDirection, out: &mut Vec<String>) {
        if frames.len() <= 1 {
            out.extend(frames.iter().map(|f| f.id.clone()));
            return;
        }
        if let Some((top, bottom)) = best_cut(&frames, true) {
            go(top.iter().map(|&i| frames[i]).collect(), direction, out);
            go(bottom.iter().map(|&i| frames[i]).collect(), direction, out);
            return;
        }
        if let Some((left, right)) = best_cut(&frames, false) {
            let l: Vec<&Frame> = left.iter().map(|&i| frames[i]).collect();
            let r: Vec<&Frame> = right.iter().map(|&i| frames[i]).collect();
            let (first, second) = if direction == ReadingDirection::Rtl { (r, l) } else { (l, r) };
            go(first, direction, out);
            go(second, direction, out);
            return;
        }
        let mut rest = frames;
        rest.sort_by_key(|f| {
            let lead = if direction == ReadingDirection::Rtl { -i64::from(f.bbox.xmax()) } else { i64::from(f.bbox.xmin()) };
            (f.bbox.ymin(), lead, f.id.clone())
        });
        out.extend(rest.iter().map(|f| f.id.clone()));
    }

    let mut out = Vec::new();
    go(frames.iter().collect(), direction, &mut out);
    out
}

/// Stand-in for a real model when recording the fixture cassette.
///
/// Speakers follow the frame-distance rule. The emotion is the gold face
/// label of the chosen speaker half the time and a seeded random label
/// otherwise. The reply is wrapped in chatty prose. One region answers with
/// garbage so the cassette exercises the fallback path.
pub fn stylized_llm(req: &LlmRequest<'_>) -> Result<String, LlmError> {
    if req.page == 4 && req.inputs.scene.region == 1 {
        return Ok("I'm sorry, I can't read this page clearly.".into());
    }
    let scripted = ScriptedBackend::respond(req.inputs, req.memory, req.page_no);
    let mut value: serde_json::Value = serde_json::from_str(&scripted).unwrap();
    let mut rng = derive_rng(11, &["stylized", &req.inputs.scene.key()]);
    let scene = req.inputs.scene;
    if let Some(map) = value["attributions"].as_object_mut() {
        for (text_id, entry) in map.iter_mut() {
            let speaker = entry["speaker"].as_str().unwrap_or("unknown").to_string();
            let text = scene.text(text_id).unwrap();
            let gold = scene
                .faces
                .iter()
                .filter(|f| f.character == speaker && f.emotion.is_some())
                .min_by(|a, b| a.bbox.center_distance(&text.bbox).total_cmp(&b.bbox.center_distance(&text.bbox)))
                .and_then(|f| f.emotion);
            let label = match gold {
                Some(e) if rng.gen_bool(0.5) => e,
                _ => Emotion::ALL[rng.gen_range(0..Emotion::ALL.len())],
            };
            let word = match label {
                Emotion::Anger => "Angry",
                Emotion::Happiness => "happy",
                other => other.as_str(),
            };
            entry["emotion"] = serde_json::Value::String(word.into());
        }
    }
    Ok(format!("Here is my analysis of the page.\n```json\n{}\n```\n", serde_json::to_string_pretty(&value).unwrap()))
}
