use checkpoint_core::fusion::Detection;
use checkpoint_core::metrics::{
    evaluate_detection, evaluate_identity, evaluate_tracking, majority_map, GroundTruth, GtBox,
};
use checkpoint_core::tracker::TrackedBox;
use checkpoint_core::{BBox, FrameIdx, ObjectClass};
use proptest::prelude::*;

const P: ObjectClass = ObjectClass::Person;

fn b(x: f64, y: f64) -> BBox {
    BBox::new(x, y, 40.0, 40.0).unwrap()
}

fn gt(id: u32, frame: FrameIdx, x: f64) -> GtBox {
    GtBox {
        frame,
        camera: 1,
        cls: P,
        id,
        bbox: b(x, 100.0),
    }
}

fn hyp(label: u32, frame: FrameIdx, x: f64) -> TrackedBox {
    TrackedBox {
        frame,
        camera: 1,
        cls: P,
        label,
        bbox: b(x, 100.0),
    }
}

#[test]
fn detection_counts_match_hand_tally() {
    let truth = GroundTruth::from_boxes(vec![gt(1, 0, 100.0), gt(2, 0, 300.0), gt(3, 0, 500.0)]);
    let dets = vec![
        Detection::new(0, 1, P, b(102.0, 100.0), 0.9),
        Detection::new(0, 1, P, b(300.0, 101.0), 0.9),
        Detection::new(0, 1, P, b(900.0, 100.0), 0.9),
    ];
    let r = evaluate_detection(&truth, &dets, 0.5);
    assert_eq!((r.tp, r.fp, r.fn_), (2, 1, 1));
    assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
    assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
    assert!((r.moda - 1.0 / 3.0).abs() < 1e-12);
    assert!((r.far - 1.0).abs() < 1e-12);
}

#[test]
fn label_swap_costs_one_switch_and_half_the_identity_score() {
    let truth = GroundTruth::from_boxes((0..10).map(|f| gt(1, f, 100.0 + f as f64)).collect());
    let h: Vec<TrackedBox> = (0..10)
        .map(|f| hyp(if f < 5 { 7 } else { 8 }, f, 100.0 + f as f64))
        .collect();
    let r = evaluate_tracking(&truth, &h, 0.5);
    assert_eq!((r.tp, r.fp, r.fn_, r.ids), (10, 0, 0, 1));
    assert!((r.mota - 0.9).abs() < 1e-12);
    assert_eq!((r.idtp, r.idfp, r.idfn), (5, 5, 5));
    assert!((r.idf1 - 0.5).abs() < 1e-12);
    assert_eq!((r.mostly_tracked, r.mostly_lost), (1, 0));
}

#[test]
fn frames_without_truth_count_only_when_annotated() {
    let mut truth = GroundTruth::from_boxes(vec![gt(1, 0, 100.0)]);
    let h = vec![hyp(1, 0, 100.0), hyp(1, 1, 100.0)];
    assert_eq!(evaluate_tracking(&truth, &h, 0.5).fp, 0);
    truth.annotated.insert(1);
    assert_eq!(evaluate_tracking(&truth, &h, 0.5).fp, 1);
}

#[test]
fn mostly_lost_counts_barely_covered_objects() {
    let mut boxes: Vec<GtBox> = (0..10).map(|f| gt(1, f, 100.0)).collect();
    boxes.extend((0..10).map(|f| gt(2, f, 400.0)));
    let truth = GroundTruth::from_boxes(boxes);
    let h: Vec<TrackedBox> = (0..10).map(|f| hyp(1, f, 100.0)).chain([hyp(2, 0, 400.0)]).collect();
    let r = evaluate_tracking(&truth, &h, 0.5);
    assert_eq!((r.gt_tracks, r.mostly_tracked, r.mostly_lost), (2, 1, 1));
}

#[test]
fn majority_vote_maps_labels() {
    let truth = GroundTruth::from_boxes((0..6).flat_map(|f| [gt(1, f, 100.0), gt(2, f, 400.0)]).collect());
    let h: Vec<TrackedBox> = (0..6)
        .map(|f| hyp(9, f, if f < 4 { 100.0 } else { 400.0 }))
        .chain((0..6).map(|f| hyp(3, f, 400.0)))
        .collect();
    let m = majority_map(&truth, &h, 0.5);
    assert_eq!(m[&9], 1);
    assert_eq!(m[&3], 2);
}

fn scene() -> impl Strategy<Value = (Vec<GtBox>, Vec<TrackedBox>)> {
    let g = proptest::collection::vec((0u32..8, 1u32..4, 0.0f64..600.0), 0..30);
    let h = proptest::collection::vec((0u32..8, 1u32..5, 0.0f64..600.0), 0..30);
    (g, h).prop_map(|(g, h)| {
        let mut gt_boxes: Vec<GtBox> = g.into_iter().map(|(f, id, x)| gt(id, f, x)).collect();
        // one box per id and frame
        gt_boxes.sort_by_key(|x| (x.frame, x.id));
        gt_boxes.dedup_by_key(|x| (x.frame, x.id));
        let mut hyp_boxes: Vec<TrackedBox> = h.into_iter().map(|(f, l, x)| hyp(l, f, x)).collect();
        hyp_boxes.sort_by_key(|x| (x.frame, x.label));
        hyp_boxes.dedup_by_key(|x| (x.frame, x.label));
        (gt_boxes, hyp_boxes)
    })
}

proptest! {
    #[test]
    fn clear_mot_identities((g, h) in scene()) {
        let truth = GroundTruth::from_boxes(g);
        let r = evaluate_tracking(&truth, &h, 0.5);
        prop_assert_eq!(r.tp + r.fn_, r.gt_total);
        prop_assert_eq!(r.gt_total, truth.boxes.len() as u64);
        prop_assert!(r.mota <= r.moda + 1e-12);
        let id = evaluate_identity(&truth, &h, 0.5);
        prop_assert_eq!(id.idtp + id.idfn, truth.boxes.len() as u64);
        prop_assert!(id.idf1 >= 0.0 && id.idf1 <= 1.0);
    }

    #[test]
    fn truth_scored_against_itself_is_perfect((g, _) in scene()) {
        prop_assume!(!g.is_empty());
        let truth = GroundTruth::from_boxes(g.clone());
        let h: Vec<TrackedBox> = g.iter().map(|x| TrackedBox { frame: x.frame, camera: 1, cls: P, label: x.id, bbox: x.bbox }).collect();
        let r = evaluate_tracking(&truth, &h, 0.5);
        prop_assert_eq!((r.fp, r.fn_, r.ids), (0, 0, 0));
        prop_assert!((r.mota - 1.0).abs() < 1e-12);
        prop_assert!((r.idf1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_order_does_not_matter((g, mut h) in scene()) {
        let truth = GroundTruth::from_boxes(g);
        let a = evaluate_tracking(&truth, &h, 0.5);
        h.reverse();
        prop_assert_eq!(a, evaluate_tracking(&truth, &h, 0.5));
    }
}
