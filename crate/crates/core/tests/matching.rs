mod common;

use common::*;
use proptest::prelude::*;
use vispipe_core::eval::{match_tagging, GoldObject, MatchMode, Task};
use vispipe_core::image::{BBox, ObjectRegion};
use vispipe_oracles::matching::{iou as oracle_iou, max_matches};

fn region(b: [f64; 4], tag: &str) -> ObjectRegion {
    let mut r = ObjectRegion::new(BBox::new(b[0], b[1], b[2], b[3]), 1.0);
    r.tag = Some(tag.to_string());
    r
}

fn gold(b: [f64; 4], tag: &str) -> GoldObject {
    GoldObject { bbox: BBox::new(b[0], b[1], b[2], b[3]), tag: tag.to_string() }
}

fn bx() -> impl Strategy<Value = [f64; 4]> {
    (0u8..12, 0u8..12, 1u8..6, 1u8..6).prop_map(|(x, y, w, h)| {
        let (x, y) = (x as f64, y as f64);
        [x, y, x + w as f64, y + h as f64]
    })
}

fn tag() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["a", "b", "A "])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn greedy_matching_is_maximal_and_half_optimal(
        preds in prop::collection::vec((bx(), tag()), 0..=5),
        golds in prop::collection::vec((bx(), tag()), 0..=5),
    ) {
        let p: Vec<ObjectRegion> = preds.iter().map(|(b, t)| region(*b, t)).collect();
        let g: Vec<GoldObject> = golds.iter().map(|(b, t)| gold(*b, t)).collect();
        let pb: Vec<[f64; 4]> = preds.iter().map(|x| x.0).collect();
        let gb: Vec<[f64; 4]> = golds.iter().map(|x| x.0).collect();

        let loc = match_tagging(&p, &g, 0.5, MatchMode::Localization);
        let best = max_matches(&pb, &gb, 0.5, None);
        prop_assert!(loc.pairs.len() <= best);
        prop_assert!(2 * loc.pairs.len() >= best);
        for pair in &loc.pairs {
            prop_assert!((pair.iou - oracle_iou(&pb[pair.pred], &gb[pair.gold])).abs() < 1e-12);
        }
        // No unmatched pair above threshold is left over.
        for (i, a) in pb.iter().enumerate() {
            for (j, b) in gb.iter().enumerate() {
                if oracle_iou(a, b) >= 0.5 {
                    prop_assert!(loc.pairs.iter().any(|c| c.pred == i || c.gold == j));
                }
            }
        }

        let tagged = match_tagging(&p, &g, 0.5, MatchMode::Tagging);
        prop_assert!(tagged.precision <= loc.precision && tagged.recall <= loc.recall);
        prop_assert!(tagged.pairs.iter().all(|c| loc.pairs.contains(c)));
    }
}

#[test]
fn disjoint_gold_boxes_match_optimally() {
    // Gold boxes that do not overlap each other: greedy equals the optimum.
    let g = [[0.0, 0.0, 10.0, 10.0], [20.0, 0.0, 30.0, 10.0], [0.0, 20.0, 10.0, 30.0]];
    let p = [[1.0, 1.0, 10.0, 10.0], [20.0, 2.0, 31.0, 10.0], [2.0, 20.0, 8.0, 28.0], [40.0, 40.0, 44.0, 44.0]];
    let gt = ["x", "y", "z"];
    let pt = ["x", "Y", "q", "z"];
    let regions: Vec<ObjectRegion> = p.iter().zip(pt).map(|(b, t)| region(*b, t)).collect();
    let golds: Vec<GoldObject> = g.iter().zip(gt).map(|(b, t)| gold(*b, t)).collect();
    let loc = match_tagging(&regions, &golds, 0.5, MatchMode::Localization);
    assert_eq!(loc.pairs.len(), max_matches(&p, &g, 0.5, None));
    let tagged = match_tagging(&regions, &golds, 0.5, MatchMode::Tagging);
    assert_eq!(tagged.pairs.len(), max_matches(&p, &g, 0.5, Some((&pt, &gt))));
    assert_eq!((tagged.precision, tagged.recall), (0.5, 2.0 / 3.0));
}

#[test]
fn empty_sides() {
    let r = match_tagging(&[], &[], 0.5, MatchMode::Tagging);
    assert_eq!((r.precision, r.recall), (1.0, 1.0));
    let r = match_tagging(&[region([0.0, 0.0, 1.0, 1.0], "a")], &[], 0.5, MatchMode::Tagging);
    assert_eq!((r.precision, r.recall), (0.0, 1.0));
    let r = match_tagging(&[], &[gold([0.0, 0.0, 1.0, 1.0], "a")], 0.5, MatchMode::Tagging);
    assert_eq!((r.precision, r.recall), (0.0, 0.0));
}

#[test]
fn gold_tagging_boxes_match_their_own_scene_shapes() {
    let data = dataset(Task::Tagging);
    for r in &data.dataset.records {
        let g = r.objects.as_ref().unwrap();
        let preds: Vec<ObjectRegion> = g.iter().map(|o| region(o.bbox.into(), &o.tag)).collect();
        let m = match_tagging(&preds, g, 0.5, MatchMode::Tagging);
        assert_eq!((m.precision, m.recall), (1.0, 1.0), "{}", r.id);
    }
}
