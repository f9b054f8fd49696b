//! `checkpoint-track`: batch front end for the checkpoint tracking pipeline.
//!
//! Exit codes: 0 on success, 1 on a validation error (bad arguments, files
//! or configs), 2 on an internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use checkpoint_core::config::PipelineConfig;
use checkpoint_core::fusion::{AugmentedFrame, FusionConfig};
use checkpoint_core::io::{self, FusedDetections, TrackletSet};
use checkpoint_core::pipeline::{self, PipelineInputs};
use checkpoint_core::scenario::{generate, ScenarioConfig};
use checkpoint_core::{CameraId, Exec};

#[derive(Parser)]
#[command(
    name = "checkpoint-track",
    version,
    about = "Multi-camera tracking for overhead checkpoint video"
)]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON). Defaults cover every camera found in the inputs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Only process this camera.
    #[arg(long)]
    camera: Option<CameraId>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: detections, ground truth, homography and a
    /// matching pipeline config.
    Simulate {
        /// Scenario config (JSON); defaults to the built-in two-camera scene.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Only render this camera.
        #[arg(long)]
        camera: Option<CameraId>,
        /// Rotation angles per frame.
        #[arg(long, default_value_t = 20)]
        angles: usize,
        /// Detector score threshold.
        #[arg(long, default_value_t = 0.5)]
        eta_det: f64,
    },
    /// Fuse per-angle detections into `fused.jsonl`.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        detections: PathBuf,
    },
    /// Track fused detections into `tracklets.jsonl`.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fused: PathBuf,
    },
    /// Stitch tracklet fragments into `stitched.jsonl`.
    Stitch {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tracklets: PathBuf,
    },
    /// Relabel tracklets across camera pairs into `handoff.jsonl` and `links.json`.
    Handoff {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tracklets: PathBuf,
    },
    /// Build the bag ownership ledger `ledger.jsonl`.
    Bags {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tracklets: PathBuf,
    },
    /// Score stage outputs against ground truth into `report.json` and `report.txt`.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Ground truth, MOT-style CSV.
        #[arg(long)]
        gt: PathBuf,
        /// Ground truth with ids kept across re-entries and cameras; scores
        /// the handoff stage instead of `--gt`.
        #[arg(long)]
        gt_global: Option<PathBuf>,
        #[arg(long)]
        fused: Option<PathBuf>,
        /// Tracklets scored as the `tracking` stage.
        #[arg(long)]
        tracking: Option<PathBuf>,
        /// Tracklets scored as the `handoff` stage.
        #[arg(long)]
        handoff: Option<PathBuf>,
    },
    /// Run every stage. Without `--detections` a scene is simulated first.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        gt_global: Option<PathBuf>,
        /// Scenario config used when simulating.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump pooled per-angle detections with scores into `occupancy.jsonl`.
    Occupancy {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        camera: Option<CameraId>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .chain()
                .find_map(|c| c.downcast_ref::<checkpoint_core::Error>())
                .is_some_and(checkpoint_core::Error::is_validation);
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    io::write_text(&out.join(name), text)?;
    log::info!("wrote {}", out.join(name).display());
    Ok(())
}

/// The config at `path`, or defaults covering `cameras`.
fn pipeline_config(path: Option<&Path>, cameras: impl IntoIterator<Item = CameraId>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PipelineConfig::new(cameras.into_iter().collect()),
    })
}

fn scenario_config(path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg: ScenarioConfig = match path {
        Some(p) => io::read_json(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn keep_camera_frames(frames: &mut Vec<AugmentedFrame>, camera: Option<CameraId>) {
    if let Some(c) = camera {
        frames.retain(|f| f.camera == c);
    }
}

fn keep_camera_tracklets(set: &mut TrackletSet, camera: Option<CameraId>) {
    if let Some(c) = camera {
        set.cameras.retain(|h| h.id == c);
        set.tracklets.retain(|t| t.camera == c);
    }
}

fn keep_camera_fused(f: &mut FusedDetections, camera: Option<CameraId>) {
    if let Some(c) = camera {
        f.cameras.retain(|h| h.id == c);
        f.detections.retain(|d| d.camera == c);
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            camera,
            angles,
            eta_det,
        } => {
            let cfg = scenario_config(config.as_deref(), seed)?;
            let truth = generate(&cfg)?;
            let fusion = FusionConfig {
                n: angles,
                eta_det,
                ..FusionConfig::default()
            };
            let inputs = PipelineInputs::simulate(&truth, camera, &fusion, exec)?;
            write(&out, "detections.jsonl", &io::detections_to_string(&inputs.frames)?)?;
            for (name, gt) in [
                ("gt.csv", &inputs.ground_truth),
                ("gt_global.csv", &inputs.global_truth),
            ] {
                write(&out, name, &io::ground_truth_to_string(gt.as_ref().expect("simulated")))?;
            }
            write(
                &out,
                "homography.json",
                &io::homography_to_string(&truth.handoff_homography()?)?,
            )?;
            write(&out, "truth.json", &io::to_json_pretty(&truth)?)?;
            let mut pcfg = PipelineConfig::for_scenario(&truth)?;
            pcfg.fusion.n = angles;
            pcfg.fusion.eta_det = eta_det;
            for p in &mut pcfg.pairs {
                p.homography = checkpoint_core::config::HomographyRef::Path("homography.json".into());
            }
            write(&out, "pipeline.json", &io::to_json_pretty(&pcfg)?)?;
            println!(
                "simulated {} frames, {} objects, {} re-entries into {}",
                truth.frame_count,
                truth.objects.len(),
                truth.reentries.len(),
                out.display()
            );
        }
        Command::Fuse { common, detections } => {
            let mut parsed = io::parse_detections(&detections)?;
            keep_camera_frames(&mut parsed.frames, common.camera);
            let cams: Vec<CameraId> = io::camera_headers(&parsed.frames)?.iter().map(|c| c.id).collect();
            let cfg = pipeline_config(common.config.as_deref(), cams)?;
            let fused = pipeline::fuse_stage(&parsed.frames, &cfg, exec).map_err(|e| stage("fuse", e))?;
            write(&common.out, "fused.jsonl", &io::fused_to_string(&fused)?)?;
        }
        Command::Track { common, fused } => {
            let mut f = io::parse_fused(&fused)?;
            keep_camera_fused(&mut f, common.camera);
            let cfg = pipeline_config(common.config.as_deref(), f.cameras.iter().map(|c| c.id))?;
            let set = pipeline::track_stage(&f, &cfg, exec).map_err(|e| stage("track", e))?;
            write(&common.out, "tracklets.jsonl", &io::tracklets_to_string(&set)?)?;
        }
        Command::Stitch { common, tracklets } => {
            let mut set = io::parse_tracklets(&tracklets)?;
            keep_camera_tracklets(&mut set, common.camera);
            let cfg = pipeline_config(common.config.as_deref(), set.cameras.iter().map(|c| c.id))?;
            let out = pipeline::stitch_stage(&set, &cfg, exec).map_err(|e| stage("stitch", e))?;
            write(&common.out, "stitched.jsonl", &io::tracklets_to_string(&out)?)?;
        }
        Command::Handoff { common, tracklets } => {
            let mut set = io::parse_tracklets(&tracklets)?;
            keep_camera_tracklets(&mut set, common.camera);
            let cfg = pipeline_config(common.config.as_deref(), set.cameras.iter().map(|c| c.id))?;
            let (out, links) = pipeline::handoff_stage(&set, &cfg).map_err(|e| stage("handoff", e))?;
            write(&common.out, "handoff.jsonl", &io::tracklets_to_string(&out)?)?;
            write(&common.out, "links.json", &io::to_json_pretty(&links)?)?;
        }
        Command::Bags { common, tracklets } => {
            let mut set = io::parse_tracklets(&tracklets)?;
            keep_camera_tracklets(&mut set, common.camera);
            let cfg = pipeline_config(common.config.as_deref(), set.cameras.iter().map(|c| c.id))?;
            let ledgers = pipeline::bags_stage(&set, &cfg).map_err(|e| stage("bags", e))?;
            write(&common.out, "ledger.jsonl", &io::ledgers_to_string(&ledgers)?)?;
        }
        Command::Evaluate {
            common,
            gt,
            gt_global,
            fused,
            tracking,
            handoff,
        } => {
            let gt = io::parse_ground_truth(&gt)?;
            let fused = fused.map(|p| io::parse_fused(&p)).transpose()?.map(|mut f| {
                keep_camera_fused(&mut f, common.camera);
                f
            });
            let load = |path: Option<PathBuf>| -> Result<Option<TrackletSet>> {
                let Some(p) = path else { return Ok(None) };
                let mut set = io::parse_tracklets(&p)?;
                keep_camera_tracklets(&mut set, common.camera);
                Ok(Some(set))
            };
            let (tracking, handoff) = (load(tracking)?, load(handoff)?);
            let gt_global = gt_global.map(|p| io::parse_ground_truth(&p)).transpose()?;
            let cams = gt.boxes.iter().map(|b| b.camera);
            let cfg = pipeline_config(
                common.config.as_deref(),
                cams.collect::<std::collections::BTreeSet<_>>(),
            )?;
            let tracking_refs: Vec<(&str, &TrackletSet)> = tracking.iter().map(|s| ("tracking", s)).collect();
            let mut rows = pipeline::evaluate_stage(&gt, fused.as_ref(), &tracking_refs, cfg.iou_thr);
            if let Some(h) = &handoff {
                let g = gt_global.as_ref().unwrap_or(&gt);
                rows.extend(pipeline::evaluate_stage(g, None, &[("handoff", h)], cfg.iou_thr));
            }
            write(&common.out, "report.json", &io::to_json_pretty(&rows)?)?;
            let table = pipeline::report_table(&rows);
            write(&common.out, "report.txt", &table)?;
            print!("{table}");
        }
        Command::Pipeline {
            common,
            detections,
            gt,
            gt_global,
            scenario,
            seed,
        } => {
            let (inputs, default_cfg) = match detections {
                Some(path) => {
                    let mut frames = io::parse_detections(&path)?.frames;
                    keep_camera_frames(&mut frames, common.camera);
                    let ground_truth = gt.map(|g| io::parse_ground_truth(&g)).transpose()?;
                    let global_truth = gt_global.map(|g| io::parse_ground_truth(&g)).transpose()?;
                    let cams: Vec<CameraId> = io::camera_headers(&frames)?.iter().map(|c| c.id).collect();
                    let inputs = PipelineInputs {
                        frames,
                        ground_truth,
                        global_truth,
                        seed,
                    };
                    (inputs, PipelineConfig::new(cams))
                }
                None => {
                    let scfg = scenario_config(scenario.as_deref(), seed)?;
                    let truth = generate(&scfg)?;
                    let pcfg = PipelineConfig::for_scenario(&truth)?;
                    let inputs = PipelineInputs::simulate(&truth, common.camera, &pcfg.fusion, exec)?;
                    (inputs, pcfg)
                }
            };
            let cfg = match &common.config {
                Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => default_cfg,
            };
            let (_, run) = pipeline::run_pipeline(&cfg, &inputs, Some(&common.out), exec)?;
            if !run.reports.is_empty() {
                print!("{}", pipeline::report_table(&run.reports));
            }
            println!("outputs and manifest written to {}", common.out.display());
        }
        Command::Occupancy {
            detections,
            out,
            camera,
        } => {
            let mut parsed = io::parse_detections(&detections)?;
            keep_camera_frames(&mut parsed.frames, camera);
            let pooled = pipeline::occupancy(&parsed.frames, exec)?;
            let cams = io::camera_headers(&parsed.frames)?;
            write(&out, "occupancy.jsonl", &io::occupancy_to_string(&cams, &pooled)?)?;
        }
    }
    Ok(())
}

fn stage(name: &'static str, e: checkpoint_core::Error) -> anyhow::Error {
    anyhow::Error::new(e).context(format!("stage `{name}` failed"))
}
