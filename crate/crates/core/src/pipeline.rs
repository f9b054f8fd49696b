//! End-to-end run: fuse, track, stitch, associate cameras, associate bags,
//! evaluate.
//!
//! Every stage is a function of the previous stage's output, so a run can be
//! resumed from any persisted intermediate. A full run writes these files:
//!
//! | file             | contents                                  |
//! |------------------|-------------------------------------------|
//! | `fused.jsonl`    | fused detections, image coordinates       |
//! | `tracklets.jsonl`| tracker output per camera and class       |
//! | `stitched.jsonl` | tracklets after stitching                 |
//! | `handoff.jsonl`  | tracklets after cross-camera relabeling   |
//! | `links.json`     | linked auxiliary/primary label pairs      |
//! | `ledger.jsonl`   | bag ownership per camera                  |
//! | `tracks.csv`     | final tracks, MOT-style                   |
//! | `report.json`    | evaluation (when ground truth is given)   |
//! | `report.txt`     | the same as an aligned table              |
//! | `manifest.json`  | digests of the config, inputs and outputs |

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bagassoc::{associate, AssociationLedger};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fusion::{fuse_frames, pooled, AugmentedFrame, Detection, FusionConfig};
use crate::io::{self, CameraHeader, FusedDetections, TrackletSet};
use crate::metrics::{evaluate_detection, evaluate_tracking, EvalReport, GroundTruth};
use crate::scenario::ScenarioTruth;
use crate::tracker::{self, tracklet_boxes};
use crate::tracklets::{associate_cameras, stitch, Tracklet};
use crate::{CameraId, Label, ObjectClass};

pub const MANIFEST_FORMAT: &str = "checkpoint-manifest";

/// Labels of one camera and class occupy a disjoint block, so tracklets from
/// different streams never share a label.
pub const LABEL_STRIDE: Label = 1_000_000;
const BAG_LABEL_OFFSET: Label = LABEL_STRIDE / 2;

pub fn namespaced_label(camera: CameraId, cls: ObjectClass, local: Label) -> Label {
    let offset = match cls {
        ObjectClass::Person => 0,
        ObjectClass::Bag => BAG_LABEL_OFFSET,
    };
    camera * LABEL_STRIDE + offset + local
}

fn check_cameras(cfg: &PipelineConfig, cameras: &[CameraHeader]) -> Result<()> {
    match cameras.iter().find(|c| !cfg.cameras.contains(&c.id)) {
        Some(c) => Err(Error::UnknownCamera(c.id)),
        None => Ok(()),
    }
}

/// Fuse every augmented frame into image-space detections.
pub fn fuse_stage(frames: &[AugmentedFrame], cfg: &PipelineConfig, exec: Exec) -> Result<FusedDetections> {
    let cameras = io::camera_headers(frames)?;
    check_cameras(cfg, &cameras)?;
    let fused = fuse_frames(frames, &cfg.fusion, exec)?;
    Ok(FusedDetections {
        cameras,
        detections: fused.into_iter().flatten().collect(),
    })
}

/// Pooled detections of every frame, for occupancy plots.
pub fn occupancy(frames: &[AugmentedFrame], exec: Exec) -> Result<Vec<Detection>> {
    let per_frame = exec
        .map(frames, |af| -> Result<Vec<Detection>> {
            let mut v = pooled(af, ObjectClass::Person)?;
            v.extend(pooled(af, ObjectClass::Bag)?);
            Ok(v)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(per_frame.into_iter().flatten().collect())
}

fn streams(cameras: &[CameraHeader]) -> Vec<(CameraId, ObjectClass)> {
    cameras
        .iter()
        .flat_map(|c| ObjectClass::ALL.into_iter().map(move |cls| (c.id, cls)))
        .collect()
}

/// Track every camera and class independently.
pub fn track_stage(fused: &FusedDetections, cfg: &PipelineConfig, exec: Exec) -> Result<TrackletSet> {
    check_cameras(cfg, &fused.cameras)?;
    let jobs = streams(&fused.cameras);
    let results = exec.map(&jobs, |&(camera, cls)| -> Result<Vec<Tracklet>> {
        let stream = fused.stream(camera, cls)?;
        let mut ts = tracker::run(&stream, cfg.tracker.get(cls), camera, cls)?;
        for t in &mut ts {
            t.label = namespaced_label(camera, cls, t.label);
        }
        Ok(ts)
    });
    let mut tracklets = Vec::new();
    for r in results {
        tracklets.extend(r?);
    }
    Ok(TrackletSet {
        cameras: fused.cameras.clone(),
        tracklets,
    })
}

/// Stitch fragments within each camera and class.
pub fn stitch_stage(set: &TrackletSet, cfg: &PipelineConfig, exec: Exec) -> Result<TrackletSet> {
    let jobs = streams(&set.cameras);
    let results = exec.map(&jobs, |&(camera, cls)| stitch(&set.select(camera, cls), &cfg.stitch));
    let mut tracklets = Vec::new();
    for r in results {
        tracklets.extend(r?);
    }
    Ok(TrackletSet {
        cameras: set.cameras.clone(),
        tracklets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLinks {
    pub primary: CameraId,
    pub auxiliary: CameraId,
    pub cls: ObjectClass,
    /// `(auxiliary label, primary label)` before relabeling.
    pub edges: Vec<(Label, Label)>,
}

/// Relabel tracklets across every configured camera pair, in config order.
pub fn handoff_stage(set: &TrackletSet, cfg: &PipelineConfig) -> Result<(TrackletSet, Vec<PairLinks>)> {
    let present = |c: CameraId| set.cameras.iter().any(|h| h.id == c);
    let mut current = set.tracklets.clone();
    let mut links = Vec::new();
    for pair in &cfg.pairs {
        if !present(pair.primary) || !present(pair.auxiliary) {
            continue;
        }
        let hcfg = cfg.handoff(pair)?;
        for cls in ObjectClass::ALL {
            let pick = |cam: CameraId| -> Vec<Tracklet> {
                current
                    .iter()
                    .filter(|t| t.camera == cam && t.cls == cls)
                    .cloned()
                    .collect()
            };
            let r = associate_cameras(&pick(pair.primary), &pick(pair.auxiliary), &hcfg)?;
            current.retain(|t| !(t.cls == cls && (t.camera == pair.primary || t.camera == pair.auxiliary)));
            current.extend(r.primary);
            current.extend(r.auxiliary);
            links.push(PairLinks {
                primary: pair.primary,
                auxiliary: pair.auxiliary,
                cls,
                edges: r.edges,
            });
        }
    }
    // keep the input's stream order; labels can now repeat within a stream
    let order: BTreeMap<(CameraId, ObjectClass), usize> = streams(&set.cameras)
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    current.sort_by_key(|t| (order[&(t.camera, t.cls)], t.label, t.first_frame()));
    Ok((
        TrackletSet {
            cameras: set.cameras.clone(),
            tracklets: current,
        },
        links,
    ))
}

/// Bag ownership for every camera that is not the auxiliary of a pair.
pub fn bags_stage(set: &TrackletSet, cfg: &PipelineConfig) -> Result<BTreeMap<CameraId, AssociationLedger>> {
    set.cameras
        .iter()
        .filter(|c| !cfg.pairs.iter().any(|p| p.auxiliary == c.id))
        .map(|c| {
            let persons = tracklet_boxes(&set.select(c.id, ObjectClass::Person));
            let bags = tracklet_boxes(&set.select(c.id, ObjectClass::Bag));
            Ok((c.id, associate(&persons, &bags, &cfg.assoc)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `fusion`, `tracking` or `handoff`.
    pub stage: String,
    pub camera: CameraId,
    pub cls: ObjectClass,
    pub report: EvalReport,
}

impl ReportRow {
    pub fn name(&self) -> String {
        format!("{} c{} {}", self.stage, self.camera, self.cls)
    }
}

/// Evaluate whatever stage outputs are given against ground truth, per
/// camera and class.
pub fn evaluate_stage(
    gt: &GroundTruth,
    fused: Option<&FusedDetections>,
    labeled: &[(&str, &TrackletSet)],
    iou_thr: f64,
) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    let mut cameras: Vec<CameraId> = fused
        .map(|f| f.cameras.iter().map(|c| c.id).collect())
        .unwrap_or_default();
    for (_, set) in labeled {
        cameras.extend(set.cameras.iter().map(|c| c.id));
    }
    let mut seen = std::collections::BTreeSet::new();
    cameras.retain(|c| seen.insert(*c));
    for camera in cameras {
        for cls in ObjectClass::ALL {
            let g = gt.filter(Some(camera), Some(cls));
            if let Some(f) = fused {
                let dets: Vec<Detection> = f
                    .detections
                    .iter()
                    .filter(|d| d.camera == camera && d.cls == cls)
                    .cloned()
                    .collect();
                rows.push(ReportRow {
                    stage: "fusion".into(),
                    camera,
                    cls,
                    report: evaluate_detection(&g, &dets, iou_thr),
                });
            }
            for (stage, set) in labeled {
                let hyp = tracklet_boxes(&set.select(camera, cls));
                rows.push(ReportRow {
                    stage: (*stage).to_string(),
                    camera,
                    cls,
                    report: evaluate_tracking(&g, &hyp, iou_thr),
                });
            }
        }
    }
    rows
}

pub fn report_table(rows: &[ReportRow]) -> String {
    let mut out = EvalReport::table_header();
    out.push('\n');
    for r in rows {
        out.push_str(&r.report.table_row(&r.name()));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct PipelineInputs {
    pub frames: Vec<AugmentedFrame>,
    pub ground_truth: Option<GroundTruth>,
    /// Ground truth whose ids persist across re-entries and cameras; scores
    /// the handoff stage when given.
    pub global_truth: Option<GroundTruth>,
    /// Recorded in the manifest when the inputs were simulated.
    pub seed: Option<u64>,
}

impl PipelineInputs {
    /// Mock detections and both ground truths of a synthetic scene, for all
    /// of its cameras or only `camera`.
    pub fn simulate(
        truth: &ScenarioTruth,
        camera: Option<CameraId>,
        fusion: &FusionConfig,
        exec: Exec,
    ) -> Result<Self> {
        let mut inputs = PipelineInputs {
            ground_truth: Some(GroundTruth::default()),
            global_truth: Some(GroundTruth::default()),
            seed: Some(truth.config.seed),
            ..Default::default()
        };
        for id in truth.camera_ids() {
            if camera.is_some_and(|c| c != id) {
                continue;
            }
            inputs.frames.extend(truth.render(id, fusion.n, fusion.eta_det, exec)?);
            for (gt, g) in [
                (&mut inputs.ground_truth, truth.ground_truth(id)?),
                (&mut inputs.global_truth, truth.ground_truth_global(id)?),
            ] {
                let gt = gt.as_mut().expect("set above");
                gt.boxes.extend(g.boxes);
                gt.annotated.extend(g.annotated);
            }
        }
        Ok(inputs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub fused: FusedDetections,
    pub tracklets: TrackletSet,
    pub stitched: TrackletSet,
    pub handoff: TrackletSet,
    pub links: Vec<PairLinks>,
    pub ledgers: BTreeMap<CameraId, AssociationLedger>,
    pub reports: Vec<ReportRow>,
}

impl PipelineRun {
    /// Output files by name, as written to the output directory.
    pub fn render(&self) -> Result<Vec<(&'static str, String)>> {
        let mut files = vec![
            ("fused.jsonl", io::fused_to_string(&self.fused)?),
            ("tracklets.jsonl", io::tracklets_to_string(&self.tracklets)?),
            ("stitched.jsonl", io::tracklets_to_string(&self.stitched)?),
            ("handoff.jsonl", io::tracklets_to_string(&self.handoff)?),
            ("links.json", io::to_json_pretty(&self.links)?),
            ("ledger.jsonl", io::ledgers_to_string(&self.ledgers)?),
            (
                "tracks.csv",
                io::tracks_to_string(&tracklet_boxes(&self.handoff.tracklets)),
            ),
        ];
        if !self.reports.is_empty() {
            files.push(("report.json", io::to_json_pretty(&self.reports)?));
            files.push(("report.txt", report_table(&self.reports)));
        }
        Ok(files)
    }

    pub fn report(&self, stage: &str, camera: CameraId, cls: ObjectClass) -> Option<&EvalReport> {
        self.reports
            .iter()
            .find(|r| r.stage == stage && r.camera == camera && r.cls == cls)
            .map(|r| &r.report)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub artifact_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config_sha256: String,
    /// Digests of the canonical serialization of each input.
    pub inputs: BTreeMap<String, String>,
    /// Stage name to its output file.
    pub outputs: BTreeMap<String, OutputRecord>,
}

/// Run every stage on in-memory inputs.
pub fn run_stages(cfg: &PipelineConfig, inputs: &PipelineInputs, exec: Exec) -> Result<PipelineRun> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let fused = fuse_stage(&inputs.frames, cfg, exec).map_err(|e| e.in_stage("fuse"))?;
    let tracklets = track_stage(&fused, cfg, exec).map_err(|e| e.in_stage("track"))?;
    let stitched = stitch_stage(&tracklets, cfg, exec).map_err(|e| e.in_stage("stitch"))?;
    let (handoff, links) = handoff_stage(&stitched, cfg).map_err(|e| e.in_stage("handoff"))?;
    let ledgers = bags_stage(&handoff, cfg).map_err(|e| e.in_stage("bags"))?;
    let mut reports = Vec::new();
    if let Some(gt) = &inputs.ground_truth {
        reports = evaluate_stage(gt, Some(&fused), &[("tracking", &stitched)], cfg.iou_thr);
    }
    if let Some(gt) = inputs.global_truth.as_ref().or(inputs.ground_truth.as_ref()) {
        reports.extend(evaluate_stage(gt, None, &[("handoff", &handoff)], cfg.iou_thr));
    }
    Ok(PipelineRun {
        fused,
        tracklets,
        stitched,
        handoff,
        links,
        ledgers,
        reports,
    })
}

fn stage_of(file: &str) -> &'static str {
    match file {
        "fused.jsonl" => "fuse",
        "tracklets.jsonl" => "track",
        "stitched.jsonl" => "stitch",
        "handoff.jsonl" => "handoff",
        "links.json" => "links",
        "ledger.jsonl" => "bags",
        "tracks.csv" => "tracks",
        "report.json" => "evaluate",
        _ => "report_table",
    }
}

/// Manifest for a run without touching the file system.
pub fn manifest(
    cfg: &PipelineConfig,
    inputs: &PipelineInputs,
    files: &[(&'static str, String)],
) -> Result<RunManifest> {
    let mut input_digests = BTreeMap::new();
    input_digests.insert(
        "detections".to_string(),
        io::sha256_hex(io::detections_to_string(&inputs.frames)?.as_bytes()),
    );
    for (name, gt) in [
        ("ground_truth", &inputs.ground_truth),
        ("global_truth", &inputs.global_truth),
    ] {
        if let Some(gt) = gt {
            input_digests.insert(
                name.to_string(),
                io::sha256_hex(io::ground_truth_to_string(gt).as_bytes()),
            );
        }
    }
    Ok(RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: io::FORMAT_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        seed: inputs.seed,
        config_sha256: io::sha256_hex(&serde_json::to_vec(cfg)?),
        inputs: input_digests,
        outputs: files
            .iter()
            .map(|(name, text)| {
                (
                    stage_of(name).to_string(),
                    OutputRecord {
                        path: (*name).to_string(),
                        sha256: io::sha256_hex(text.as_bytes()),
                    },
                )
            })
            .collect(),
    })
}

/// Run every stage and, when `out` is given, write each stage's output and
/// `manifest.json` there.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    inputs: &PipelineInputs,
    out: Option<&Path>,
    exec: Exec,
) -> Result<(RunManifest, PipelineRun)> {
    let run = run_stages(cfg, inputs, exec)?;
    let files = run.render()?;
    let m = manifest(cfg, inputs, &files)?;
    if let Some(dir) = out {
        for (name, text) in &files {
            io::write_text(&dir.join(name), text)?;
        }
        io::write_json(&dir.join("manifest.json"), &m)?;
    }
    Ok((m, run))
}
