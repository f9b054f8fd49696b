use std::path::Path;

use checkpoint_core::config::PipelineConfig;
use checkpoint_core::io::{self, FusedDetections, TrackletSet};
use checkpoint_core::pipeline::{fuse_stage, PipelineInputs};
use checkpoint_core::scenario::{generate, ScenarioConfig};
use checkpoint_core::tracker::tracklet_boxes;
use checkpoint_core::{Error, Exec};

fn small() -> ScenarioConfig {
    ScenarioConfig {
        passengers: 3,
        bags: 2,
        reentries: 1,
        ..ScenarioConfig::default()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs())
}

#[test]
fn detections_round_trip() {
    let truth = generate(&small()).unwrap();
    let cfg = PipelineConfig::for_scenario(&truth).unwrap();
    let inputs = PipelineInputs::simulate(&truth, None, &cfg.fusion, Exec::Parallel).unwrap();
    let text = io::detections_to_string(&inputs.frames).unwrap();
    let parsed = io::parse_detections_str(&text, Path::new("d.jsonl")).unwrap();
    assert_eq!(parsed.n_angles, cfg.fusion.n);
    assert_eq!(parsed.frames, inputs.frames);
    assert_eq!(io::detections_to_string(&parsed.frames).unwrap(), text);
}

#[test]
fn ground_truth_round_trips_through_corner_format() {
    let truth = generate(&small()).unwrap();
    let gt = truth.ground_truth(truth.config.primary.id).unwrap();
    let parsed = io::parse_ground_truth_str(&io::ground_truth_to_string(&gt), Path::new("gt.csv")).unwrap();
    assert_eq!(parsed.annotated, gt.annotated);
    assert_eq!(parsed.boxes.len(), gt.boxes.len());
    for (a, b) in parsed.boxes.iter().zip(&gt.boxes) {
        assert_eq!((a.frame, a.id, a.cls, a.camera), (b.frame, b.id, b.cls, b.camera));
        assert!(close(a.bbox.cx, b.bbox.cx) && close(a.bbox.cy, b.bbox.cy));
        assert!(close(a.bbox.w, b.bbox.w) && close(a.bbox.h, b.bbox.h));
    }
}

#[test]
fn stage_files_round_trip() {
    let truth = generate(&small()).unwrap();
    let cfg = PipelineConfig::for_scenario(&truth).unwrap();
    let inputs = PipelineInputs::simulate(&truth, None, &cfg.fusion, Exec::Parallel).unwrap();
    let fused = fuse_stage(&inputs.frames, &cfg, Exec::Parallel).unwrap();
    let text = io::fused_to_string(&fused).unwrap();
    let back: FusedDetections = io::parse_fused_str(&text, Path::new("f.jsonl")).unwrap();
    assert_eq!(back, fused);

    let set = TrackletSet {
        cameras: fused.cameras.clone(),
        tracklets: truth
            .gt_tracklets(truth.config.primary.id, checkpoint_core::ObjectClass::Person)
            .unwrap(),
    };
    let text = io::tracklets_to_string(&set).unwrap();
    assert_eq!(io::parse_tracklets_str(&text, Path::new("t.jsonl")).unwrap(), set);

    let boxes = tracklet_boxes(&set.tracklets);
    let back = io::parse_tracks_str(&io::tracks_to_string(&boxes), Path::new("t.csv")).unwrap();
    assert_eq!(back.len(), boxes.len());
    assert!(back
        .iter()
        .zip(&boxes)
        .all(|(a, b)| a.label == b.label && close(a.bbox.cx, b.bbox.cx)));
}

#[test]
fn homography_file_round_trip() {
    let truth = generate(&small()).unwrap();
    let h = truth.handoff_homography().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.json");
    io::write_homography(&path, &h).unwrap();
    assert_eq!(io::load_homography(&path).unwrap(), h);
}

#[test]
fn malformed_records_name_line_and_field() {
    let truth = generate(&small()).unwrap();
    let cfg = PipelineConfig::for_scenario(&truth).unwrap();
    let inputs = PipelineInputs::simulate(&truth, None, &cfg.fusion, Exec::Parallel).unwrap();
    let text = io::detections_to_string(&inputs.frames[..3]).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    assert!(lines.len() > 2, "scenario produced no detections early on");
    lines[2] = lines[2].replace("\"score\":", "\"score\":-");
    let err = io::parse_detections_str(&lines.join("\n"), Path::new("bad.jsonl")).unwrap_err();
    match err {
        Error::Parse { line, field, .. } => {
            assert_eq!(line, 3);
            assert_eq!(field, "score");
        }
        other => panic!("unexpected error {other}"),
    }
}
