mod common;

use common::{b, frames_scene, guillotine_layout, oracle_order, random_layout};
use panelvox::annotation::Frame;
use panelvox::layout::{order_frames, LayoutConfig, ReadingDirection};
use panelvox::seed::derive_rng;
use proptest::prelude::*;

fn ordered(frames: Vec<Frame>, direction: ReadingDirection) -> Vec<String> {
    let cfg = LayoutConfig { reading_direction: direction, ..Default::default() };
    order_frames(&frames_scene(frames), &cfg).ordered_frames
}

#[test]
fn agrees_with_brute_force_on_scattered_layouts() {
    for i in 0..300 {
        let mut rng = derive_rng(1, &["scatter", &i.to_string()]);
        let n = 2 + i % 9;
        let frames = random_layout(&mut rng, n);
        for d in [ReadingDirection::Rtl, ReadingDirection::Ltr] {
            assert_eq!(ordered(frames.clone(), d), oracle_order(&frames, d), "layout {i} {d:?}: {frames:?}");
        }
    }
}

#[test]
fn agrees_with_brute_force_on_grid_layouts() {
    for i in 0..300 {
        let mut rng = derive_rng(2, &["grid", &i.to_string()]);
        let frames = guillotine_layout(&mut rng, 2 + i % 10);
        for d in [ReadingDirection::Rtl, ReadingDirection::Ltr] {
            assert_eq!(ordered(frames.clone(), d), oracle_order(&frames, d), "layout {i} {d:?}");
        }
    }
}

#[test]
fn pinwheel_falls_back_to_top_edge_order() {
    // Four frames around a hole; no straight cut separates them.
    let frames = vec![
        Frame { id: "a".into(), bbox: b(0, 0, 600, 300) },
        Frame { id: "b".into(), bbox: b(600, 0, 1000, 600) },
        Frame { id: "c".into(), bbox: b(400, 600, 1000, 1000) },
        Frame { id: "d".into(), bbox: b(0, 300, 400, 1000) },
    ];
    assert_eq!(ordered(frames.clone(), ReadingDirection::Rtl), ["b", "a", "d", "c"]);
    assert_eq!(oracle_order(&frames, ReadingDirection::Rtl), ["b", "a", "d", "c"]);
}

proptest! {
    #[test]
    fn every_frame_appears_once(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = derive_rng(seed, &["perm"]);
        let frames = random_layout(&mut rng, n);
        let mut got = ordered(frames.clone(), ReadingDirection::Rtl);
        got.sort();
        let mut want: Vec<String> = frames.iter().map(|f| f.id.clone()).collect();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn input_order_does_not_matter(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = derive_rng(seed, &["shuffle"]);
        let frames = guillotine_layout(&mut rng, n);
        let mut reversed = frames.clone();
        reversed.reverse();
        prop_assert_eq!(ordered(frames, ReadingDirection::Rtl), ordered(reversed, ReadingDirection::Rtl));
    }

    #[test]
    fn mirroring_swaps_direction(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = derive_rng(seed, &["mirror"]);
        let frames = guillotine_layout(&mut rng, n);
        let mirrored: Vec<Frame> = frames
            .iter()
            .map(|f| Frame { id: f.id.clone(), bbox: b(1000 - f.bbox.xmax(), f.bbox.ymin(), 1000 - f.bbox.xmin(), f.bbox.ymax()) })
            .collect();
        prop_assert_eq!(ordered(frames, ReadingDirection::Rtl), ordered(mirrored, ReadingDirection::Ltr));
    }
}
