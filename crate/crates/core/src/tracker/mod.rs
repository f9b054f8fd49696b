//! Multiple-hypothesis tracking for one camera and one object class.
//!
//! The tracker keeps a small set of global hypotheses, each a complete,
//! consistent interpretation of the detections seen so far. Every frame each
//! hypothesis is expanded with its best track-to-detection assignments
//! (Murty's k-best over a gated log-likelihood cost matrix), the children are
//! ranked by cumulative score, capped at `max_hyp`, and pruned so that all
//! survivors agree with the leader on decisions older than `nscan` frames.
//! With `nscan = 1` and `max_hyp = 1` this is gated global nearest neighbour.

pub mod kalman;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assignment::{CostMatrix, MurtyNode};
use crate::error::{Error, Result};
use crate::fusion::Detection;
use crate::geometry::BBox;
use crate::tracklets::Tracklet;
use crate::{CameraId, FrameIdx, Label, ObjectClass};

pub use kalman::Kalman;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Gate on the squared Mahalanobis distance of the center residual.
    pub gate_chi2: f64,
    pub process_noise: [f64; 4],
    pub meas_noise: [f64; 4],
    pub confirm_hits: u32,
    pub delete_misses: u32,
    pub nscan: usize,
    pub max_hyp: usize,
    /// Multiplier applied to a hypothesis' accumulated score every frame.
    pub score_decay: f64,
    pub p_detect: f64,
    /// False-alarm density per square pixel.
    pub clutter_density: f64,
    /// New-target density per square pixel.
    pub new_density: f64,
    /// Children scoring this many nats below the best are not expanded.
    pub prune_delta: f64,
    pub init_velocity_var: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            gate_chi2: 9.21,
            process_noise: [1.0; 4],
            meas_noise: [4.0, 4.0, 9.0, 9.0],
            confirm_hits: 2,
            delete_misses: 10,
            nscan: 3,
            max_hyp: 100,
            score_decay: 1.0,
            p_detect: 0.9,
            clutter_density: 1e-5,
            new_density: 1e-5,
            prune_delta: 10.0,
            init_velocity_var: 25.0,
        }
    }
}

impl TrackerParams {
    /// Frame-by-frame gated assignment with no deferred decisions.
    pub fn gnn() -> Self {
        Self {
            nscan: 1,
            max_hyp: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gate_chi2", self.gate_chi2),
            ("clutter_density", self.clutter_density),
            ("new_density", self.new_density),
            ("prune_delta", self.prune_delta),
            ("init_velocity_var", self.init_velocity_var),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be finite and > 0"));
            }
        }
        if self.meas_noise.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::param("meas_noise", "variances must be > 0"));
        }
        if self.process_noise.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("process_noise", "variances must be >= 0"));
        }
        if self.confirm_hits == 0 || self.delete_misses == 0 {
            return Err(Error::param("confirm_hits", "hit and miss counts must be >= 1"));
        }
        if self.nscan == 0 || self.max_hyp == 0 {
            return Err(Error::param("nscan", "nscan and max_hyp must be >= 1"));
        }
        if !(self.score_decay > 0.0 && self.score_decay <= 1.0) {
            return Err(Error::param("score_decay", "must lie in (0, 1]"));
        }
        if !(self.p_detect > 0.0 && self.p_detect < 1.0) {
            return Err(Error::param("p_detect", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Terminated,
}

/// Birth of a track: the frame and detection index it started from. Equal
/// keys in different hypotheses denote the same track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackKey {
    pub birth_frame: FrameIdx,
    pub det_index: u32,
}

/// Persistent list of `(frame, box)` shared between hypotheses.
#[derive(Debug, Clone, Default)]
struct History(Option<Arc<HistNode>>);

#[derive(Debug)]
struct HistNode {
    frame: FrameIdx,
    bbox: BBox,
    prev: History,
}

impl Drop for HistNode {
    fn drop(&mut self) {
        // unlink iteratively so long histories do not recurse
        let mut next = self.prev.0.take();
        while let Some(node) = next {
            match Arc::try_unwrap(node) {
                Ok(mut n) => next = n.prev.0.take(),
                Err(_) => break,
            }
        }
    }
}

impl History {
    fn push(&self, frame: FrameIdx, bbox: BBox) -> History {
        History(Some(Arc::new(HistNode {
            frame,
            bbox,
            prev: self.clone(),
        })))
    }

    fn to_vec(&self) -> Vec<(FrameIdx, BBox)> {
        let mut out = Vec::new();
        let mut cur = self.0.as_ref();
        while let Some(n) = cur {
            out.push((n.frame, n.bbox));
            cur = n.prev.0.as_ref();
        }
        out.reverse();
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrackState {
    pub key: TrackKey,
    pub label: Option<Label>,
    pub kf: Kalman,
    pub status: TrackStatus,
    /// Consecutive associated frames.
    pub hits: u32,
    /// Consecutive missed frames.
    pub misses: u32,
    pub last_hit: FrameIdx,
    history: History,
}

impl TrackState {
    fn born(key: TrackKey, det: &Detection, params: &TrackerParams) -> Self {
        let kf = Kalman::init(&det.bbox, &params.meas_noise, params.init_velocity_var);
        let status = if params.confirm_hits <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        Self {
            key,
            label: None,
            history: History::default().push(det.frame, kf.bbox()),
            kf,
            status,
            hits: 1,
            misses: 0,
            last_hit: det.frame,
        }
    }

    /// Kalman time update over `dt` frames.
    pub fn predict(&self, dt: u32, params: &TrackerParams) -> TrackState {
        TrackState {
            kf: self.kf.predict(dt as f64, &params.process_noise),
            ..self.clone()
        }
    }

    pub fn history(&self) -> Vec<(FrameIdx, BBox)> {
        self.history.to_vec()
    }

    pub fn bbox(&self) -> BBox {
        self.kf.bbox()
    }
}

/// One confirmed track's estimate in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedBox {
    pub frame: FrameIdx,
    pub camera: CameraId,
    pub cls: ObjectClass,
    pub label: Label,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone)]
struct Hypothesis {
    /// Own id first, then ancestors, at most `nscan` entries.
    ancestry: Vec<u64>,
    score: f64,
    tracks: Vec<TrackState>,
    finished: Vec<Arc<TrackState>>,
}

struct Candidate {
    score: f64,
    seq: u64,
    parent: usize,
    node: MurtyNode,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Per-parent expansion data for one frame.
struct Expansion {
    predicted: Vec<TrackState>,
    /// Constant removed from every entry to keep costs non-negative.
    shift: f64,
}

#[derive(Debug)]
pub struct Tracker {
    params: TrackerParams,
    camera: CameraId,
    cls: ObjectClass,
    hyps: Vec<Hypothesis>,
    labels: BTreeMap<TrackKey, Label>,
    next_label: Label,
    next_id: u64,
    last_frame: Option<FrameIdx>,
}

impl Tracker {
    pub fn new(params: TrackerParams, camera: CameraId, cls: ObjectClass) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            camera,
            cls,
            hyps: vec![Hypothesis {
                ancestry: vec![0],
                score: 0.0,
                tracks: Vec::new(),
                finished: Vec::new(),
            }],
            labels: BTreeMap::new(),
            next_label: 1,
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn hypothesis_count(&self) -> usize {
        self.hyps.len()
    }

    /// Tracks of the current best hypothesis.
    pub fn tracks(&self) -> &[TrackState] {
        &self.hyps[0].tracks
    }

    fn check_input(&self, frame: FrameIdx, dets: &[Detection]) -> Result<()> {
        if let Some(prev) = self.last_frame {
            if frame <= prev {
                return Err(Error::OutOfOrder { prev, next: frame });
            }
        }
        for d in dets {
            if d.frame != frame {
                return Err(Error::MixedDetections {
                    frame,
                    detail: format!("found a detection stamped frame {}", d.frame),
                });
            }
            if d.cls != self.cls {
                return Err(Error::MixedDetections {
                    frame,
                    detail: format!("tracker for {} received a {} detection", self.cls, d.cls),
                });
            }
        }
        Ok(())
    }

    fn expand(&self, parent: &Hypothesis, dets: &[Detection], dt: u32) -> Result<(Expansion, CostMatrix)> {
        let p = &self.params;
        let m = dets.len();
        let predicted: Vec<TrackState> = parent.tracks.iter().map(|t| t.predict(dt, p)).collect();
        let k = predicted.len();
        let llr_new = (p.new_density / p.clutter_density).ln();
        let miss = -(1.0 - p.p_detect).ln();
        let hit_base = p.p_detect.ln() - p.clutter_density.ln() - llr_new;

        let mut raw = vec![f64::INFINITY; k * (m + k)];
        for (i, t) in predicted.iter().enumerate() {
            let row = &mut raw[i * (m + k)..(i + 1) * (m + k)];
            for (j, d) in dets.iter().enumerate() {
                let inn = t.kf.innovation(&d.bbox, &p.meas_noise);
                if inn.center_d2() <= p.gate_chi2 {
                    let c = -(hit_base + inn.center_log_likelihood());
                    if c.is_finite() {
                        row[j] = c;
                    }
                }
            }
            row[m + i] = miss;
        }
        let shift = raw.iter().copied().filter(|c| c.is_finite()).fold(0.0f64, f64::min);
        for c in raw.iter_mut() {
            *c -= shift;
        }
        let costs = CostMatrix::new(k, m + k, raw)?;
        Ok((Expansion { predicted, shift }, costs))
    }

    /// Consume one frame of detections and return the confirmed tracks of
    /// the best hypothesis that were associated in this frame.
    pub fn step(&mut self, frame: FrameIdx, dets: &[Detection]) -> Result<Vec<TrackedBox>> {
        self.check_input(frame, dets)?;
        let dt = self.last_frame.map_or(1, |prev| frame - prev);
        self.last_frame = Some(frame);
        let p = self.params.clone();
        let m = dets.len();
        let llr_new = (p.new_density / p.clutter_density).ln();

        let mut expansions = Vec::with_capacity(self.hyps.len());
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        for (pi, parent) in self.hyps.iter().enumerate() {
            let (exp, costs) = self.expand(parent, dets, dt)?;
            let base = p.score_decay * parent.score + m as f64 * llr_new;
            let k = exp.predicted.len() as f64;
            if let Some(node) = MurtyNode::root(costs) {
                let score = base - (node.total + k * exp.shift);
                heap.push(Candidate {
                    score,
                    seq,
                    parent: pi,
                    node,
                });
                seq += 1;
            }
            expansions.push(exp);
        }

        let mut children: Vec<Hypothesis> = Vec::new();
        let mut best_score = f64::NEG_INFINITY;
        while children.len() < p.max_hyp {
            let Some(cand) = heap.pop() else { break };
            if cand.score < best_score - p.prune_delta {
                break;
            }
            best_score = best_score.max(cand.score);
            let parent = &self.hyps[cand.parent];
            let exp = &expansions[cand.parent];
            let base = p.score_decay * parent.score + m as f64 * llr_new;
            let k = exp.predicted.len() as f64;
            if children.len() + 1 < p.max_hyp {
                for node in cand.node.partition() {
                    let score = base - (node.total + k * exp.shift);
                    heap.push(Candidate {
                        score,
                        seq,
                        parent: cand.parent,
                        node,
                    });
                    seq += 1;
                }
            }
            let id = self.next_id;
            self.next_id += 1;
            children.push(self.child(parent, exp, &cand.node, dets, frame, id, cand.score));
        }

        // N-scan: keep only children that agree with the leader nscan-1 frames back
        if let Some(anchor) = children.first().and_then(|c| c.ancestry.get(p.nscan - 1)).copied() {
            children.retain(|c| c.ancestry.get(p.nscan - 1) == Some(&anchor));
        }
        if let Some(top) = children.first().map(|c| c.score) {
            for c in &mut children {
                c.score -= top;
            }
        }
        self.hyps = children;
        self.assign_labels();

        let best = &self.hyps[0];
        Ok(best
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.last_hit == frame)
            .map(|t| TrackedBox {
                frame,
                camera: self.camera,
                cls: self.cls,
                label: t.label.expect("confirmed tracks carry labels"),
                bbox: t.bbox(),
            })
            .collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn child(
        &self,
        parent: &Hypothesis,
        exp: &Expansion,
        node: &MurtyNode,
        dets: &[Detection],
        frame: FrameIdx,
        id: u64,
        score: f64,
    ) -> Hypothesis {
        let p = &self.params;
        let m = dets.len();
        let mut used = vec![false; m];
        let mut tracks = Vec::with_capacity(exp.predicted.len() + m);
        let mut finished = parent.finished.clone();
        for (i, t) in exp.predicted.iter().enumerate() {
            let col = node.assignment.col_of(i).expect("complete assignment");
            let mut t = t.clone();
            if col < m {
                used[col] = true;
                t.kf = t.kf.update(&dets[col].bbox, &p.meas_noise);
                t.hits += 1;
                t.misses = 0;
                t.last_hit = frame;
                t.history = t.history.push(frame, t.kf.bbox());
                if t.status == TrackStatus::Tentative && t.hits >= p.confirm_hits {
                    t.status = TrackStatus::Confirmed;
                }
                tracks.push(t);
            } else {
                t.misses += 1;
                t.hits = 0;
                match t.status {
                    TrackStatus::Tentative => {}
                    _ if t.misses >= p.delete_misses => {
                        t.status = TrackStatus::Terminated;
                        finished.push(Arc::new(t));
                    }
                    _ => tracks.push(t),
                }
            }
        }
        for (j, d) in dets.iter().enumerate() {
            if !used[j] {
                let key = TrackKey {
                    birth_frame: frame,
                    det_index: j as u32,
                };
                tracks.push(TrackState::born(key, d, p));
            }
        }
        let mut ancestry = Vec::with_capacity(p.nscan);
        ancestry.push(id);
        ancestry.extend(parent.ancestry.iter().take(p.nscan - 1));
        Hypothesis {
            ancestry,
            score,
            tracks,
            finished,
        }
    }

    /// Give every newly confirmed track a label, shared across hypotheses.
    fn assign_labels(&mut self) {
        for h in &mut self.hyps {
            for t in &mut h.tracks {
                if t.status == TrackStatus::Confirmed && t.label.is_none() {
                    let next = &mut self.next_label;
                    let label = *self.labels.entry(t.key).or_insert_with(|| {
                        let l = *next;
                        *next += 1;
                        l
                    });
                    t.label = Some(label);
                }
            }
        }
    }

    /// Confirmed tracks of the best hypothesis, finished ones included.
    pub fn finish(self) -> Vec<Tracklet> {
        let best = &self.hyps[0];
        let mut out: Vec<Tracklet> = best
            .finished
            .iter()
            .map(|t| t.as_ref())
            .chain(best.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed))
            .map(|t| Tracklet {
                label: t.label.expect("confirmed tracks carry labels"),
                camera: self.camera,
                cls: self.cls,
                entries: t.history(),
            })
            .collect();
        out.sort_by_key(|t| t.label);
        out
    }
}

/// Track one camera/class stream and return every confirmed tracklet.
pub fn run(
    stream: &[(FrameIdx, Vec<Detection>)],
    params: &TrackerParams,
    camera: CameraId,
    cls: ObjectClass,
) -> Result<Vec<Tracklet>> {
    let mut tracker = Tracker::new(params.clone(), camera, cls)?;
    for (frame, dets) in stream {
        tracker.step(*frame, dets)?;
    }
    Ok(tracker.finish())
}

/// Per-frame boxes of a set of tracklets, ordered by frame then label.
pub fn tracklet_boxes(ts: &[Tracklet]) -> Vec<TrackedBox> {
    let mut out: Vec<TrackedBox> = ts
        .iter()
        .flat_map(|t| {
            t.entries.iter().map(move |&(frame, bbox)| TrackedBox {
                frame,
                camera: t.camera,
                cls: t.cls,
                label: t.label,
                bbox,
            })
        })
        .collect();
    out.sort_by_key(|a| (a.frame, a.label));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: FrameIdx, cx: f64, cy: f64) -> Detection {
        Detection::new(
            frame,
            0,
            ObjectClass::Person,
            BBox::new(cx, cy, 40.0, 30.0).unwrap(),
            0.9,
        )
    }

    #[test]
    fn first_detection_is_tentative() {
        let mut t = Tracker::new(TrackerParams::default(), 0, ObjectClass::Person).unwrap();
        assert!(t.step(0, &[det(0, 10.0, 10.0)]).unwrap().is_empty());
        assert_eq!(t.tracks().len(), 1);
        assert_eq!(t.tracks()[0].status, TrackStatus::Tentative);
        let out = t.step(1, &[det(1, 11.0, 10.0)]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, 1);
    }

    #[test]
    fn linear_motion_keeps_one_label() {
        let stream: Vec<_> = (0..30)
            .map(|f| (f, vec![det(f, 20.0 + 3.0 * f as f64, 50.0)]))
            .collect();
        let ts = run(&stream, &TrackerParams::default(), 0, ObjectClass::Person).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].entries.len(), 30);
    }

    #[test]
    fn empty_stream() {
        assert!(run(&[], &TrackerParams::default(), 0, ObjectClass::Bag)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn stationary_object_length_bounds() {
        let p = TrackerParams::default();
        let stream: Vec<_> = (0..100).map(|f| (f, vec![det(f, 100.0, 100.0)])).collect();
        let ts = run(&stream, &p, 0, ObjectClass::Person).unwrap();
        assert_eq!(ts.len(), 1);
        let n = ts[0].entries.len();
        assert!(n <= 100 && n >= 100 - (p.confirm_hits as usize - 1));
    }

    #[test]
    fn short_dropout_keeps_label() {
        let mut stream = Vec::new();
        for f in 0..40u32 {
            let dets = if (15..22).contains(&f) {
                vec![]
            } else {
                vec![det(f, 50.0 + 2.0 * f as f64, 80.0)]
            };
            stream.push((f, dets));
        }
        let ts = run(&stream, &TrackerParams::default(), 0, ObjectClass::Person).unwrap();
        assert_eq!(ts.len(), 1);
    }

    #[test]
    fn long_dropout_terminates() {
        let p = TrackerParams::default();
        let mut stream = Vec::new();
        for f in 0..60u32 {
            let dets = if (10..10 + p.delete_misses + 5).contains(&f) {
                vec![]
            } else {
                vec![det(f, 50.0, 80.0)]
            };
            stream.push((f, dets));
        }
        let ts = run(&stream, &p, 0, ObjectClass::Person).unwrap();
        assert_eq!(ts.len(), 2);
        assert!(ts[0].label < ts[1].label);
    }

    #[test]
    fn rejects_bad_input() {
        let mut t = Tracker::new(TrackerParams::default(), 0, ObjectClass::Person).unwrap();
        assert!(t.step(0, &[det(1, 0.0, 0.0)]).is_err());
        t.step(3, &[]).unwrap();
        assert!(matches!(t.step(3, &[]), Err(Error::OutOfOrder { .. })));
        let mut bag = det(4, 0.0, 0.0);
        bag.cls = ObjectClass::Bag;
        assert!(t.step(4, &[bag]).is_err());
    }

    #[test]
    fn history_survives_deep_chains() {
        let mut h = History::default();
        for f in 0..200_000u32 {
            h = h.push(f, BBox::new(0.0, 0.0, 1.0, 1.0).unwrap());
        }
        assert_eq!(h.to_vec().len(), 200_000);
        drop(h);
    }
}
