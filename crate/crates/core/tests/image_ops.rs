mod common;

use common::fixtures;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vispipe_core::emoji::EmojiTable;
use vispipe_core::image::{BBox, Image, Mask, ObjectRegion};
use vispipe_core::imageops::{bg_blur, color_pop, emoji, tag};
use vispipe_core::par::Exec;
use vispipe_core::scene::Scene;

fn scene() -> Image {
    let src = std::fs::read_to_string(fixtures().join("scenes/edit_pop.json")).unwrap();
    Scene::from_json(&src).unwrap().render().unwrap()
}

fn region(img: &Image, b: [f64; 4], label: &str) -> ObjectRegion {
    let bb = BBox::from(b);
    ObjectRegion::new(bb, 1.0).with_mask(Mask::from_box(img.width(), img.height(), &bb)).with_tag(label)
}

fn noise(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Image {
    let px: Vec<u8> = (0..w * h).flat_map(|_| [rng.random(), rng.random(), rng.random(), 255]).collect();
    Image::from_rgba(w, h, px).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, w: u32, h: u32) -> [f64; 4] {
    let x0 = rng.random_range(0..w - 2) as f64;
    let y0 = rng.random_range(0..h - 2) as f64;
    let x1 = rng.random_range(x0 as u32 + 1..=w) as f64;
    let y1 = rng.random_range(y0 as u32 + 1..=h) as f64;
    [x0, y0, x1, y1]
}

fn inside(b: [f64; 4], x: u32, y: u32) -> bool {
    (x as f64) >= b[0] && (x as f64) < b[2] && (y as f64) >= b[1] && (y as f64) < b[3]
}

#[test]
fn color_pop_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let img = noise(&mut rng, 40, 30);
        let r = vec![region(&img, random_box(&mut rng, 40, 30), "x")];
        let once = color_pop(&img, &r).unwrap();
        assert_eq!(color_pop(&once, &r).unwrap(), once);
    }
}

#[test]
fn blur_leaves_constant_images_alone() {
    let img = Image::new(37, 23, [90, 140, 200, 255]).unwrap();
    let r = vec![region(&img, [5.0, 5.0, 10.0, 10.0], "x")];
    for exec in [Exec::Sequential, Exec::Parallel] {
        assert_eq!(bg_blur(&img, &r, exec).unwrap(), img);
    }
}

#[test]
fn tag_and_emoji_stay_inside_their_regions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let img = noise(&mut rng, 64, 48);
        let b = random_box(&mut rng, 64, 48);
        let r = vec![region(&img, b, "ab")];
        let tagged = tag(&img, &r).unwrap();
        let stamped = emoji(&img, &r, "smiling_face", EmojiTable::builtin()).unwrap();
        for y in 0..48 {
            for x in 0..64 {
                // The 11-row label band starts at the box's left edge, above the
                // box when there is room and across its top rows otherwise.
                let band = x as f64 >= b[0] && y as f64 >= b[1] - 11.0 && (y as f64) < b[1] + 11.0;
                if !inside(b, x, y) && !band {
                    assert_eq!(tagged.get(x, y), img.get(x, y), "tag touched ({x},{y}) for {b:?}");
                }
                if !inside(b, x, y) {
                    assert_eq!(stamped.get(x, y), img.get(x, y), "emoji touched ({x},{y}) for {b:?}");
                }
            }
        }
    }
}

fn check_golden(name: &str, img: &Image) {
    let path = fixtures().join(format!("golden/{name}.png"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, img.to_png()).unwrap();
    }
    let want = Image::decode(&std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap();
    assert!(want == *img, "{name} differs from {}", path.display());
}

#[test]
fn golden_images() {
    let img = scene();
    let circle = region(&img, [20.0, 30.0, 60.0, 70.0], "red circle");
    let square = region(&img, [90.0, 30.0, 130.0, 70.0], "blue square");
    let both = vec![circle.clone(), square];
    check_golden("color_pop", &color_pop(&img, &both[..1]).unwrap());
    check_golden("bg_blur", &bg_blur(&img, &both[..1], Exec::default()).unwrap());
    check_golden("tag", &tag(&img, &both).unwrap());
    check_golden("emoji", &emoji(&img, &both[1..], "winking_face", EmojiTable::builtin()).unwrap());
}

#[test]
fn color_pop_grays_with_reference_luma() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let img = noise(&mut rng, 64, 64);
    let b = [10.0, 12.0, 30.0, 40.0];
    let out = color_pop(&img, &[region(&img, b, "x")]).unwrap();
    for y in 0..64 {
        for x in 0..64 {
            let p = img.get(x, y);
            let want = if inside(b, x, y) { p } else {
                let l = vispipe_oracles::image::luma(p[0], p[1], p[2]);
                [l, l, l, p[3]]
            };
            assert_eq!(out.get(x, y), want, "({x},{y})");
        }
    }
}

#[test]
fn blur_matches_direct_window_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (w, h) in [(1, 1), (3, 17), (40, 30)] {
        let img = noise(&mut rng, w, h);
        let want = vispipe_oracles::image::box_blur(w as usize, h as usize, img.pixels(), 5, 2);
        for exec in [Exec::Sequential, Exec::Parallel] {
            let got = vispipe_core::imageops::box_blur(&img, exec);
            for (i, px) in got.pixels().chunks_exact(4).enumerate() {
                for c in 0..3 {
                    assert!((px[c] as f64 - want[c][i]).abs() <= 0.5 + 1e-3, "{w}x{h} pixel {i} channel {c}");
                }
                assert_eq!(px[3], 255);
            }
        }
    }
}
