//! Rotation-augmented detection fusion.
//!
//! A frame's region of interest is rotated through `n` evenly spaced angles,
//! the detector runs on every copy, and the detections are mapped back into
//! the original image. The pooled set is clustered per class with mean-shift
//! over `(cx, cy, w, h)`, clusters whose summed confidence divided by `n` falls
//! below `lambda` are dropped, and each surviving cluster is represented by its
//! highest-scoring member.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{iou, polygon_bbox, BBox, Polygon, Roi};
use crate::{CameraId, FrameIdx, ObjectClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: FrameIdx,
    pub camera: CameraId,
    pub cls: ObjectClass,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint: Option<Polygon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_index: Option<u32>,
}

/// Largest allowed gap between a footprint's bounding box and the stated box.
pub const FOOTPRINT_TOLERANCE: f64 = 0.5;

impl Detection {
    pub fn new(frame: FrameIdx, camera: CameraId, cls: ObjectClass, bbox: BBox, score: f64) -> Self {
        Self {
            frame,
            camera,
            cls,
            bbox,
            score,
            footprint: None,
            angle_index: None,
        }
    }

    /// Detection whose box is derived from a footprint polygon.
    pub fn from_footprint(
        frame: FrameIdx,
        camera: CameraId,
        cls: ObjectClass,
        footprint: Polygon,
        score: f64,
    ) -> Result<Self> {
        let bbox = polygon_bbox(&footprint)?;
        Ok(Self {
            footprint: Some(footprint),
            ..Self::new(frame, camera, cls, bbox, score)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::param("score", format!("{} is outside [0, 1]", self.score)));
        }
        self.bbox.validate()?;
        if let Some(fp) = &self.footprint {
            let fb = polygon_bbox(fp)?;
            let gap = [
                fb.left() - self.bbox.left(),
                fb.right() - self.bbox.right(),
                fb.top() - self.bbox.top(),
                fb.bottom() - self.bbox.bottom(),
            ]
            .into_iter()
            .fold(0.0f64, |m, d| m.max(d.abs()));
            if gap > FOOTPRINT_TOLERANCE {
                return Err(Error::param(
                    "footprint",
                    format!("bounding box differs from the stated box by {gap:.3} px"),
                ));
            }
        }
        Ok(())
    }
}

/// Detections of one frame and camera, one set per rotation angle, in the
/// coordinates of each rotated canvas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedFrame {
    pub frame: FrameIdx,
    pub camera: CameraId,
    pub roi: Roi,
    pub per_angle: Vec<Vec<Detection>>,
}

impl AugmentedFrame {
    pub fn empty(frame: FrameIdx, camera: CameraId, roi: Roi, n: usize) -> Self {
        Self {
            frame,
            camera,
            roi,
            per_angle: vec![Vec::new(); n],
        }
    }

    pub fn n_angles(&self) -> usize {
        self.per_angle.len()
    }

    pub fn detection_count(&self) -> usize {
        self.per_angle.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<Detection>,
    /// Index into `members` of the representative detection.
    pub mode: usize,
    pub score_bar: f64,
}

impl Cluster {
    pub fn mode(&self) -> &Detection {
        &self.members[self.mode]
    }
}

/// How the per-axis bandwidth is estimated from the pooled detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    /// Sample variance over the whole pool.
    Global,
    /// Variance around each target's own mean, pooled across targets. Targets
    /// are approximated by grouping detections that overlap by at least
    /// `pilot_iou`.
    #[default]
    PerTarget,
}

/// Starting points for mean-shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// Start from every detection.
    EveryPoint,
    /// Start from leader points: a detection becomes a seed unless an earlier
    /// seed lies within `seed_radius` scaled units. Points are then assigned
    /// to the nearest converged mode.
    #[default]
    Leaders,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub n: usize,
    pub lambda: f64,
    pub bandwidth_floor: [f64; 4],
    pub eta_det: f64,
    pub eta_nms: f64,
    pub convergence_eps: f64,
    pub max_iters: usize,
    pub merge_radius: f64,
    pub bandwidth: BandwidthMode,
    pub pilot_iou: f64,
    pub seeding: Seeding,
    pub seed_radius: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            n: 20,
            lambda: 0.5,
            bandwidth_floor: [4.0; 4],
            eta_det: 0.5,
            eta_nms: 0.1,
            convergence_eps: 1e-3,
            max_iters: 100,
            merge_radius: 1.0,
            bandwidth: BandwidthMode::PerTarget,
            pilot_iou: 0.5,
            seeding: Seeding::Leaders,
            seed_radius: 2.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "need at least one rotation"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::param("lambda", "must be >= 0"));
        }
        if self.bandwidth_floor.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::param("bandwidth_floor", "components must be > 0"));
        }
        for (name, v) in [("eta_det", self.eta_det), ("eta_nms", self.eta_nms)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, "must lie in [0, 1]"));
            }
        }
        if !(self.convergence_eps > 0.0) || self.max_iters == 0 {
            return Err(Error::param("convergence_eps", "need eps > 0 and max_iters > 0"));
        }
        if !(self.merge_radius > 0.0) || !(self.seed_radius > 0.0) {
            return Err(Error::param("merge_radius", "radii must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.pilot_iou) {
            return Err(Error::param("pilot_iou", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Rotation angle of slot `i`, in radians.
    pub fn angle(&self, i: usize) -> f64 {
        angle(i, self.n)
    }
}

pub fn angle(i: usize, n: usize) -> f64 {
    i as f64 * TAU / n as f64
}

/// Map detections from the canvas of the ROI rotated by `theta` back into
/// image coordinates.
pub fn remap_detections(dets: &[Detection], theta: f64, roi: &Roi) -> Result<Vec<Detection>> {
    let off = roi.canvas_offset();
    dets.iter()
        .map(|d| {
            let mut out = d.clone();
            if theta == 0.0 {
                out.bbox = d.bbox.translated(off.x, off.y);
                out.footprint = d.footprint.as_ref().map(|p| p.translated(off.x, off.y));
                return Ok(out);
            }
            let src = d.footprint.clone().unwrap_or_else(|| d.bbox.corners());
            let mapped = src.map(|q| roi.from_canvas(q, theta));
            out.bbox = polygon_bbox(&mapped)?;
            if d.footprint.is_some() {
                out.footprint = Some(mapped);
            }
            Ok(out)
        })
        .collect()
}

fn clamp_floor(var: [f64; 4], floor: &[f64; 4]) -> [f64; 4] {
    let mut out = var;
    for k in 0..4 {
        if !(out[k] >= floor[k]) {
            out[k] = floor[k];
        }
    }
    out
}

/// Per-axis sample variance of `(cx, cy, w, h)`, floored component-wise.
pub fn bandwidth(dets: &[Detection], floor: &[f64; 4]) -> Result<[f64; 4]> {
    if dets.is_empty() {
        return Err(Error::EmptyInput("bandwidth needs at least one detection"));
    }
    let cls = dets[0].cls;
    if dets.iter().any(|d| d.cls != cls) {
        return Err(Error::MixedDetections {
            frame: dets[0].frame,
            detail: "bandwidth input mixes classes".into(),
        });
    }
    let m = dets.len();
    if m < 2 {
        return Ok(*floor);
    }
    let mut mean = [0.0; 4];
    for d in dets {
        let v = d.bbox.as_vec4();
        for k in 0..4 {
            mean[k] += v[k];
        }
    }
    mean.iter_mut().for_each(|x| *x /= m as f64);
    let mut var = [0.0; 4];
    for d in dets {
        let v = d.bbox.as_vec4();
        for k in 0..4 {
            var[k] += (v[k] - mean[k]).powi(2);
        }
    }
    var.iter_mut().for_each(|x| *x /= (m - 1) as f64);
    Ok(clamp_floor(var, floor))
}

/// Greedy grouping of detections that overlap a higher-scoring leader by at
/// least `min_iou`. Returns one group index per detection.
pub fn pilot_groups(dets: &[Detection], min_iou: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut leaders: Vec<usize> = Vec::new();
    let mut group = vec![0usize; dets.len()];
    for i in order {
        let found = leaders
            .iter()
            .position(|&l| iou(&dets[l].bbox, &dets[i].bbox) >= min_iou);
        group[i] = match found {
            Some(g) => g,
            None => {
                leaders.push(i);
                leaders.len() - 1
            }
        };
    }
    group
}

/// Within-target variance pooled over targets, normalized by `m - G`.
pub fn pooled_bandwidth(dets: &[Detection], groups: &[usize], floor: &[f64; 4]) -> Result<[f64; 4]> {
    if dets.is_empty() {
        return Err(Error::EmptyInput("bandwidth needs at least one detection"));
    }
    let g = groups.iter().copied().max().map_or(0, |x| x + 1);
    let mut sum = vec![[0.0; 4]; g];
    let mut cnt = vec![0usize; g];
    for (d, &gi) in dets.iter().zip(groups) {
        let v = d.bbox.as_vec4();
        for k in 0..4 {
            sum[gi][k] += v[k];
        }
        cnt[gi] += 1;
    }
    let dof = dets.len().saturating_sub(g);
    if dof == 0 {
        return Ok(*floor);
    }
    let mut var = [0.0; 4];
    for (d, &gi) in dets.iter().zip(groups) {
        let v = d.bbox.as_vec4();
        for k in 0..4 {
            var[k] += (v[k] - sum[gi][k] / cnt[gi] as f64).powi(2);
        }
    }
    var.iter_mut().for_each(|x| *x /= dof as f64);
    Ok(clamp_floor(var, floor))
}

fn scaled_dist2(a: &[f64; 4], b: &[f64; 4], h: &[f64; 4]) -> f64 {
    (0..4).map(|k| (a[k] - b[k]).powi(2) / h[k]).sum()
}

fn shift_to_mode(start: [f64; 4], points: &[[f64; 4]], h: &[f64; 4], eps: f64, max_iters: usize) -> [f64; 4] {
    let mut x = start;
    for _ in 0..max_iters {
        let mut num = [0.0; 4];
        let mut den = 0.0;
        for p in points {
            let w = (-0.5 * scaled_dist2(p, &x, h)).exp();
            den += w;
            for k in 0..4 {
                num[k] += w * p[k];
            }
        }
        if !(den > f64::MIN_POSITIVE) {
            break;
        }
        let next = num.map(|v| v / den);
        let step = (0..4).map(|k| (next[k] - x[k]).powi(2)).sum::<f64>().sqrt();
        x = next;
        if step < eps {
            break;
        }
    }
    x
}

/// Mean-shift over raw 4-vectors. Returns a cluster index per point; indices
/// are numbered by first occurrence in input order.
pub fn mean_shift_points(points: &[[f64; 4]], h: &[f64; 4], cfg: &FusionConfig) -> Result<Vec<usize>> {
    if let Some(bad) = h.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::param("bandwidth", format!("component {bad} is not positive")));
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let r2_merge = cfg.merge_radius * cfg.merge_radius;

    let seeds: Vec<[f64; 4]> = match cfg.seeding {
        Seeding::EveryPoint => points.to_vec(),
        Seeding::Leaders => {
            let r2 = cfg.seed_radius * cfg.seed_radius;
            let mut seeds: Vec<[f64; 4]> = Vec::new();
            for p in points {
                if !seeds.iter().any(|s| scaled_dist2(s, p, h) <= r2) {
                    seeds.push(*p);
                }
            }
            seeds
        }
    };
    let modes: Vec<[f64; 4]> = seeds
        .iter()
        .map(|s| shift_to_mode(*s, points, h, cfg.convergence_eps, cfg.max_iters))
        .collect();

    // single-linkage merge of converged modes
    let mut parent: Vec<usize> = (0..modes.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..modes.len() {
        for j in 0..i {
            if scaled_dist2(&modes[i], &modes[j], h) <= r2_merge {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let seed_root: Vec<usize> = (0..modes.len()).map(|i| find(&mut parent, i)).collect();

    let point_root: Vec<usize> = match cfg.seeding {
        Seeding::EveryPoint => seed_root,
        Seeding::Leaders => points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, m) in modes.iter().enumerate() {
                    let d = scaled_dist2(p, m, h);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                seed_root[best]
            })
            .collect(),
    };

    let mut remap = std::collections::HashMap::new();
    Ok(point_root
        .into_iter()
        .map(|r| {
            let next = remap.len();
            *remap.entry(r).or_insert(next)
        })
        .collect())
}

/// Cluster a single-class detection set. The returned clusters carry their
/// score normalized by `cfg.n`.
pub fn mean_shift(dets: &[Detection], h: &[f64; 4], cfg: &FusionConfig) -> Result<Vec<Cluster>> {
    if dets.is_empty() {
        return Err(Error::EmptyInput("mean-shift needs at least one detection"));
    }
    let points: Vec<[f64; 4]> = dets.iter().map(|d| d.bbox.as_vec4()).collect();
    let labels = mean_shift_points(&points, h, cfg)?;
    let k = labels.iter().copied().max().map_or(0, |x| x + 1);
    let mut members: Vec<Vec<Detection>> = vec![Vec::new(); k];
    for (d, &l) in dets.iter().zip(&labels) {
        members[l].push(d.clone());
    }
    members
        .into_iter()
        .map(|members| {
            let score_bar = cluster_score_of(&members, cfg.n)?;
            let mode = select_mode(&members);
            Ok(Cluster {
                members,
                mode,
                score_bar,
            })
        })
        .collect()
}

fn cluster_score_of(members: &[Detection], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "rotation count must be >= 1"));
    }
    Ok(members.iter().map(|d| d.score).sum::<f64>() / n as f64)
}

/// Summed member confidence divided by the rotation count.
pub fn cluster_score(q: &Cluster, n: usize) -> Result<f64> {
    if q.members.is_empty() {
        return Err(Error::EmptyInput("cluster has no members"));
    }
    cluster_score_of(&q.members, n)
}

/// Highest score wins; ties go to the lower angle index, then input order.
fn select_mode(members: &[Detection]) -> usize {
    let mut best = 0;
    for (i, d) in members.iter().enumerate().skip(1) {
        let b = &members[best];
        let better = match d.score.total_cmp(&b.score) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => d.angle_index.unwrap_or(u32::MAX) < b.angle_index.unwrap_or(u32::MAX),
        };
        if better {
            best = i;
        }
    }
    best
}

/// All detections of class `cls` from every angle, mapped into image
/// coordinates and tagged with their angle index.
pub fn pooled(af: &AugmentedFrame, cls: ObjectClass) -> Result<Vec<Detection>> {
    let n = af.per_angle.len();
    let mut pool = Vec::new();
    for (i, set) in af.per_angle.iter().enumerate() {
        for d in set {
            if d.frame != af.frame {
                return Err(Error::MixedDetections {
                    frame: af.frame,
                    detail: format!("angle {i} holds a detection for frame {}", d.frame),
                });
            }
        }
        let picked: Vec<Detection> = set.iter().filter(|d| d.cls == cls).cloned().collect();
        if picked.is_empty() {
            continue;
        }
        let mut mapped = remap_detections(&picked, angle(i, n), &af.roi)?;
        for d in &mut mapped {
            d.angle_index = Some(i as u32);
            d.camera = af.camera;
        }
        pool.extend(mapped);
    }
    Ok(pool)
}

/// Clusters of class `cls` in one augmented frame, before the score filter.
pub fn cluster_frame(af: &AugmentedFrame, cls: ObjectClass, cfg: &FusionConfig) -> Result<Vec<Cluster>> {
    cfg.validate()?;
    if af.per_angle.len() != cfg.n {
        return Err(Error::param(
            "per_angle",
            format!(
                "frame {} has {} angle slots, expected {}",
                af.frame,
                af.per_angle.len(),
                cfg.n
            ),
        ));
    }
    let pool = pooled(af, cls)?;
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let h = match cfg.bandwidth {
        BandwidthMode::Global => bandwidth(&pool, &cfg.bandwidth_floor)?,
        BandwidthMode::PerTarget => {
            let groups = pilot_groups(&pool, cfg.pilot_iou);
            pooled_bandwidth(&pool, &groups, &cfg.bandwidth_floor)?
        }
    };
    mean_shift(&pool, &h, cfg)
}

/// Fused detections of class `cls` for one frame.
pub fn fuse_frame(af: &AugmentedFrame, cls: ObjectClass, cfg: &FusionConfig) -> Result<Vec<Detection>> {
    Ok(cluster_frame(af, cls, cfg)?
        .into_iter()
        .filter(|q| q.score_bar >= cfg.lambda)
        .map(|q| {
            let mut d = q.members[q.mode].clone();
            d.angle_index = None;
            d
        })
        .collect())
}

/// Fused detections of both classes, persons first.
pub fn fuse_all(af: &AugmentedFrame, cfg: &FusionConfig) -> Result<Vec<Detection>> {
    let mut out = fuse_frame(af, ObjectClass::Person, cfg)?;
    out.extend(fuse_frame(af, ObjectClass::Bag, cfg)?);
    Ok(out)
}

/// Fuse many frames; frames are independent, so `exec` may spread them over
/// threads. Output order matches input order.
pub fn fuse_frames(frames: &[AugmentedFrame], cfg: &FusionConfig, exec: Exec) -> Result<Vec<Vec<Detection>>> {
    cfg.validate()?;
    exec.map(frames, |af| fuse_all(af, cfg)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotate_point, Point2};
    use std::f64::consts::PI;

    fn det(cx: f64, cy: f64, w: f64, h: f64, score: f64) -> Detection {
        Detection::new(0, 0, ObjectClass::Person, BBox::new(cx, cy, w, h).unwrap(), score)
    }

    #[test]
    fn remap_identity_angle_only_translates() {
        let roi = Roi::new(100.0, 50.0, 40.0, 20.0).unwrap();
        let d = det(10.0, 5.0, 4.0, 2.0, 0.7);
        let out = remap_detections(std::slice::from_ref(&d), 0.0, &roi).unwrap();
        assert_eq!(out[0].bbox, BBox::new(90.0, 45.0, 4.0, 2.0).unwrap());
        assert_eq!(out[0].score, 0.7);
    }

    #[test]
    fn remap_half_turn_keeps_square_shape() {
        let roi = Roi::full_image(200.0, 200.0).unwrap();
        let fp = BBox::new(60.0, 80.0, 10.0, 10.0).unwrap().corners();
        let d = Detection::from_footprint(0, 0, ObjectClass::Bag, fp, 0.9).unwrap();
        let out = remap_detections(&[d], PI, &roi).unwrap();
        let b = out[0].bbox;
        assert!((b.w - 10.0).abs() < 1e-9 && (b.h - 10.0).abs() < 1e-9);
        assert!((b.cx - 140.0).abs() < 1e-9 && (b.cy - 120.0).abs() < 1e-9);
    }

    #[test]
    fn remap_quarter_rect_matches_vertex_oracle() {
        let roi = Roi::new(50.0, 40.0, 100.0, 80.0).unwrap();
        let fp = BBox::new(30.0, 20.0, 20.0, 6.0).unwrap().corners();
        let theta = PI / 4.0;
        let d = Detection::from_footprint(0, 0, ObjectClass::Bag, fp.clone(), 0.9).unwrap();
        let out = remap_detections(&[d], theta, &roi).unwrap();
        let pts: Vec<Point2> = fp
            .vertices
            .iter()
            .map(|&q| rotate_point(q + roi.canvas_offset(), -theta, roi.center()))
            .collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let b = out[0].bbox;
        assert!((b.left() - min(&xs)).abs() < 1e-9);
        assert!((b.right() - max(&xs)).abs() < 1e-9);
        assert!((b.top() - min(&ys)).abs() < 1e-9);
        assert!((b.bottom() - max(&ys)).abs() < 1e-9);
    }

    #[test]
    fn bandwidth_examples() {
        let floor = [4.0; 4];
        assert_eq!(bandwidth(&[det(1.0, 1.0, 5.0, 5.0, 1.0)], &floor).unwrap(), floor);
        let same = vec![det(1.0, 1.0, 5.0, 5.0, 1.0); 4];
        assert_eq!(bandwidth(&same, &floor).unwrap(), floor);
        let floor1 = [1.0; 4];
        let two = [det(0.0, 0.0, 5.0, 5.0, 1.0), det(2.0, 0.0, 5.0, 5.0, 1.0)];
        assert_eq!(bandwidth(&two, &floor1).unwrap(), [2.0, 1.0, 1.0, 1.0]);
        assert!(bandwidth(&[], &floor).is_err());
    }

    #[test]
    fn cluster_score_examples() {
        let mk = |k: usize, s: f64| Cluster {
            members: vec![det(0.0, 0.0, 1.0, 1.0, s); k],
            mode: 0,
            score_bar: 0.0,
        };
        assert!((cluster_score(&mk(20, 0.9), 20).unwrap() - 0.9).abs() < 1e-12);
        assert!((cluster_score(&mk(12, 8.0 / 12.0), 20).unwrap() - 0.4).abs() < 1e-12);
        assert!((cluster_score(&mk(18, 0.9), 20).unwrap() - 0.81).abs() < 1e-12);
        assert!(cluster_score(&mk(1, 0.5), 0).is_err());
    }

    #[test]
    fn mean_shift_rejects_bad_bandwidth() {
        let cfg = FusionConfig::default();
        assert!(mean_shift(&[det(0.0, 0.0, 1.0, 1.0, 1.0)], &[0.0, 1.0, 1.0, 1.0], &cfg).is_err());
    }

    #[test]
    fn mean_shift_separates_far_groups() {
        let cfg = FusionConfig::default();
        let h = [4.0; 4];
        let mut dets = Vec::new();
        for i in 0..5 {
            dets.push(det(10.0 + 0.2 * i as f64, 10.0, 20.0, 20.0, 0.5));
            dets.push(det(40.0, 10.0 - 0.2 * i as f64, 20.0, 20.0, 0.5));
        }
        for seeding in [Seeding::Leaders, Seeding::EveryPoint] {
            let cfg = FusionConfig { seeding, ..cfg.clone() };
            let q = mean_shift(&dets, &h, &cfg).unwrap();
            assert_eq!(q.len(), 2);
            assert!(q.iter().all(|c| c.members.len() == 5));
        }
    }

    #[test]
    fn mode_tie_break_prefers_lower_angle() {
        let mut a = det(0.0, 0.0, 1.0, 1.0, 0.8);
        a.angle_index = Some(3);
        let mut b = a.clone();
        b.angle_index = Some(1);
        let c = a.clone();
        assert_eq!(select_mode(&[a, b, c]), 1);
    }

    #[test]
    fn fuse_empty_and_single_object() {
        let cfg = FusionConfig::default();
        let roi = Roi::full_image(400.0, 400.0).unwrap();
        let af = AugmentedFrame::empty(3, 0, roi, cfg.n);
        assert!(fuse_frame(&af, ObjectClass::Person, &cfg).unwrap().is_empty());

        let mut af = AugmentedFrame::empty(3, 0, roi, cfg.n);
        let fp = Polygon::oriented_rect(Point2::new(150.0, 220.0), 50.0, 30.0, 0.3);
        for i in 0..cfg.n {
            let theta = cfg.angle(i);
            let canvas = fp.map(|p| roi.to_canvas(p, theta));
            af.per_angle[i].push(Detection::from_footprint(3, 0, ObjectClass::Person, canvas, 0.9).unwrap());
        }
        let out = fuse_frame(&af, ObjectClass::Person, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].angle_index.is_none());
        assert!((out[0].bbox.cx - 150.0).abs() < 1e-6 && (out[0].bbox.cy - 220.0).abs() < 1e-6);
    }

    #[test]
    fn wrong_slot_count_is_rejected() {
        let cfg = FusionConfig::default();
        let af = AugmentedFrame::empty(0, 0, Roi::full_image(10.0, 10.0).unwrap(), 3);
        assert!(fuse_frame(&af, ObjectClass::Person, &cfg).is_err());
    }
}
