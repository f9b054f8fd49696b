use std::path::Path;

use checkpoint_core::config::PipelineConfig;
use checkpoint_core::io;
use checkpoint_core::pipeline::{bags_stage, handoff_stage, run_pipeline, stitch_stage, track_stage, PipelineInputs};
use checkpoint_core::scenario::{generate, NoiseModel, ScenarioConfig, ScenarioTruth};
use checkpoint_core::{Exec, ObjectClass};

fn scene(noise: NoiseModel) -> (ScenarioTruth, PipelineConfig, PipelineInputs) {
    let truth = generate(&ScenarioConfig {
        passengers: 4,
        bags: 3,
        reentries: 2,
        noise,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let cfg = PipelineConfig::for_scenario(&truth).unwrap();
    let inputs = PipelineInputs::simulate(&truth, None, &cfg.fusion, Exec::Parallel).unwrap();
    (truth, cfg, inputs)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn noise_free_scene_is_tracked_perfectly() {
    let (truth, cfg, inputs) = scene(NoiseModel::noise_free());
    let (_, run) = run_pipeline(&cfg, &inputs, None, Exec::Parallel).unwrap();
    for cam in truth.camera_ids() {
        for cls in ObjectClass::ALL {
            let r = run.report("tracking", cam, cls).unwrap();
            assert_eq!((r.fp, r.fn_, r.ids), (0, 0, 0), "camera {cam} {cls}: {r:?}");
            let f = run.report("fusion", cam, cls).unwrap();
            assert_eq!((f.fp, f.fn_), (0, 0), "camera {cam} {cls}: {f:?}");
        }
    }
    let ledger = &run.ledgers[&truth.config.primary.id];
    assert_eq!(ledger.len(), truth.ownership.len());
    assert!(!run.ledgers.contains_key(&truth.config.auxiliary.id));
}

#[test]
fn manifest_lists_the_written_files() {
    let (_, cfg, inputs) = scene(NoiseModel::default());
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = run_pipeline(&cfg, &inputs, Some(dir.path()), Exec::Parallel).unwrap();
    for rec in m.outputs.values() {
        let bytes = std::fs::read(dir.path().join(&rec.path)).unwrap();
        assert_eq!(io::sha256_hex(&bytes), rec.sha256, "{}", rec.path);
    }
    let on_disk: checkpoint_core::pipeline::RunManifest = io::read_json(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(on_disk, m);
    assert_eq!(m.seed, Some(inputs.seed.unwrap()));
}

#[test]
fn stages_resume_from_persisted_files() {
    let (_, cfg, inputs) = scene(NoiseModel::default());
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_pipeline(&cfg, &inputs, Some(d), Exec::Parallel).unwrap();

    let fused = io::parse_fused(&d.join("fused.jsonl")).unwrap();
    let tracked = track_stage(&fused, &cfg, Exec::Sequential).unwrap();
    assert_eq!(io::tracklets_to_string(&tracked).unwrap(), read(d, "tracklets.jsonl"));

    let tracklets = io::parse_tracklets(&d.join("tracklets.jsonl")).unwrap();
    let stitched = stitch_stage(&tracklets, &cfg, Exec::Sequential).unwrap();
    assert_eq!(io::tracklets_to_string(&stitched).unwrap(), read(d, "stitched.jsonl"));

    let stitched = io::parse_tracklets(&d.join("stitched.jsonl")).unwrap();
    let (handed, links) = handoff_stage(&stitched, &cfg).unwrap();
    assert_eq!(io::tracklets_to_string(&handed).unwrap(), read(d, "handoff.jsonl"));
    assert_eq!(io::to_json_pretty(&links).unwrap(), read(d, "links.json"));

    let handed = io::parse_tracklets(&d.join("handoff.jsonl")).unwrap();
    let ledgers = bags_stage(&handed, &cfg).unwrap();
    assert_eq!(io::ledgers_to_string(&ledgers).unwrap(), read(d, "ledger.jsonl"));
}

#[test]
fn detections_file_reproduces_the_run() {
    let (_, cfg, inputs) = scene(NoiseModel::default());
    let text = io::detections_to_string(&inputs.frames).unwrap();
    let parsed = io::parse_detections_str(&text, Path::new("d.jsonl")).unwrap();
    let reloaded = PipelineInputs {
        frames: parsed.frames,
        ..inputs.clone()
    };
    let (a, _) = run_pipeline(&cfg, &inputs, None, Exec::Parallel).unwrap();
    let (b, _) = run_pipeline(&cfg, &reloaded, None, Exec::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_changes_show_in_the_manifest() {
    let (_, cfg, inputs) = scene(NoiseModel::default());
    let mut other = cfg.clone();
    other.stitch.t_th = 5;
    let (a, _) = run_pipeline(&cfg, &inputs, None, Exec::Parallel).unwrap();
    let (b, _) = run_pipeline(&other, &inputs, None, Exec::Parallel).unwrap();
    assert_ne!(a.config_sha256, b.config_sha256);
    assert_eq!(a.inputs, b.inputs);
}
