//! Synthetic checkpoint scenes and a mock per-angle detector.
//!
//! World coordinates coincide with the primary camera's image plane. The
//! layout, left to right: passengers enter on the left, divest their bags
//! onto a conveyor, pass the metal detector, wait at a retrieval slot on the
//! right until their bags arrive, and leave. A re-entry is an excursion from
//! the retrieval slot back into the primary view and out again.
//!
//! ```text
//!   y=240   parked bags                    [b] [b] [b]
//!   y=300   ===conveyor======================>
//!   y=380                                   exit lane -------->
//!   y=450   entry --> divest --> detector --> to slot
//!   y=500                                   waiting passengers
//!   y=590+  <----------- excursion lanes -----------
//!           x=0                 x=1000   x=1280           x=2200
//!           |----- primary camera -------|
//!                               |----- auxiliary camera -----|
//! ```
//!
//! Everything is a pure function of the configuration: trajectories use one
//! random stream, the detector another keyed by `(seed, frame, angle,
//! camera)`, so frames can be rendered in any order or in parallel.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fusion::{angle, AugmentedFrame, Detection};
use crate::geometry::{polygon_bbox, project_point, BBox, Homography, Point2, Polygon, Roi};
use crate::metrics::{GroundTruth, GtBox};
use crate::tracklets::Tracklet;
use crate::{CameraId, FrameIdx, ObjectClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub id: CameraId,
    pub width: f64,
    pub height: f64,
    pub roi: Roi,
    pub image_from_world: Homography,
}

impl CameraSpec {
    pub fn to_image(&self, p: Point2) -> Result<Point2> {
        project_point(&self.image_from_world, p)
    }

    /// Whether an image point lies inside both the image and the ROI.
    pub fn sees(&self, q: Point2) -> bool {
        q.x >= 0.0 && q.x < self.width && q.y >= 0.0 && q.y < self.height && self.roi.contains(q)
    }
}

/// Primary view: world x in `[0, 1280]`, identity mapping.
pub fn default_primary() -> CameraSpec {
    CameraSpec {
        id: 9,
        width: 1280.0,
        height: 720.0,
        roi: Roi::full_image(1280.0, 720.0).expect("static roi"),
        image_from_world: Homography::identity(),
    }
}

/// Auxiliary view: world x in `[1000, 2200]`, seen under a mild perspective.
pub fn default_auxiliary() -> CameraSpec {
    let world = [
        Point2::new(1000.0, 0.0),
        Point2::new(2200.0, 0.0),
        Point2::new(2200.0, 720.0),
        Point2::new(1000.0, 720.0),
    ];
    let image = [
        Point2::new(30.0, 10.0),
        Point2::new(1260.0, 0.0),
        Point2::new(1280.0, 720.0),
        Point2::new(0.0, 700.0),
    ];
    CameraSpec {
        id: 2,
        width: 1280.0,
        height: 720.0,
        roi: Roi::full_image(1280.0, 720.0).expect("static roi"),
        image_from_world: Homography::from_correspondences(&world, &image).expect("static correspondences"),
    }
}

/// Probability of detecting an object whose long axis makes angle `phi`
/// with the image x axis: `peak` when horizontal, dipping to `trough` when
/// vertical, with a Gaussian dip of angular width `width_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub peak: f64,
    pub trough: f64,
    pub width_deg: f64,
}

impl DetectionModel {
    pub fn constant(p: f64) -> Self {
        Self {
            peak: p,
            trough: p,
            width_deg: 15.0,
        }
    }

    pub fn probability(&self, phi: f64) -> f64 {
        let d = (phi.rem_euclid(PI) - FRAC_PI_2).abs();
        let w = self.width_deg.to_radians();
        let dip = (-d * d / (2.0 * w * w)).exp();
        (self.peak - (self.peak - self.trough) * dip).clamp(0.0, 1.0)
    }
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            peak: 0.95,
            trough: 0.2,
            width_deg: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub detection: DetectionModel,
    /// Standard deviation of the center offset, pixels.
    pub center_jitter: f64,
    /// Standard deviation of width and height errors, pixels.
    pub size_jitter: f64,
    /// Expected spurious detections per camera, frame and angle.
    pub spurious_rate: f64,
    pub score_range: [f64; 2],
    pub spurious_score_range: [f64; 2],
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            detection: DetectionModel::default(),
            center_jitter: 1.0,
            size_jitter: 1.0,
            spurious_rate: 0.05,
            score_range: [0.6, 1.0],
            spurious_score_range: [0.3, 0.9],
        }
    }
}

impl NoiseModel {
    /// Every object detected exactly, nothing else.
    pub fn noise_free() -> Self {
        Self {
            detection: DetectionModel::constant(1.0),
            center_jitter: 0.0,
            size_jitter: 0.0,
            spurious_rate: 0.0,
            score_range: [0.9, 0.9],
            spurious_score_range: [0.3, 0.9],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.detection;
        if !(0.0..=1.0).contains(&d.peak) || !(0.0..=1.0).contains(&d.trough) || !(d.width_deg > 0.0) {
            return Err(Error::param("detection", "probabilities in [0, 1] and width > 0"));
        }
        if !(self.center_jitter >= 0.0 && self.size_jitter >= 0.0 && self.spurious_rate >= 0.0) {
            return Err(Error::param("noise", "jitter and spurious rate must be >= 0"));
        }
        for (name, [lo, hi]) in [
            ("score_range", self.score_range),
            ("spurious_score_range", self.spurious_score_range),
        ] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::param(name, "need 0 <= lo <= hi <= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub primary: CameraSpec,
    pub auxiliary: CameraSpec,
    pub passengers: usize,
    pub bags: usize,
    pub reentries: usize,
    /// Frames between consecutive passenger arrivals.
    pub arrival_interval: u32,
    pub walk_speed: f64,
    pub belt_speed: f64,
    /// No object may move faster than this, pixels per frame.
    pub max_speed: f64,
    pub divest_dwell: [u32; 2],
    pub screening_dwell: u32,
    pub excursion_dwell: u32,
    pub retrieval_slots: usize,
    pub person_size: [f64; 2],
    pub bag_size: [f64; 2],
    pub noise: NoiseModel,
    /// Ground truth is annotated on every this-many frames.
    pub annotate_every: u32,
    pub tail_frames: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            primary: default_primary(),
            auxiliary: default_auxiliary(),
            passengers: 8,
            bags: 6,
            reentries: 4,
            arrival_interval: 60,
            walk_speed: 3.0,
            belt_speed: 4.0,
            max_speed: 8.0,
            divest_dwell: [30, 50],
            screening_dwell: 10,
            excursion_dwell: 15,
            retrieval_slots: 8,
            person_size: [56.0, 36.0],
            bag_size: [34.0, 24.0],
            noise: NoiseModel::default(),
            annotate_every: 1,
            tail_frames: 10,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.primary.id == self.auxiliary.id {
            return Err(Error::param("cameras", "primary and auxiliary ids must differ"));
        }
        if self.passengers == 0 && (self.bags > 0 || self.reentries > 0) {
            return Err(Error::param("passengers", "bags and re-entries need passengers"));
        }
        if self.bags > 2 * self.passengers {
            return Err(Error::param("bags", "at most two bags per passenger"));
        }
        if !(self.walk_speed > 0.0 && self.belt_speed > 0.0 && self.max_speed > 0.0) {
            return Err(Error::param("speed", "speeds must be > 0"));
        }
        if self.divest_dwell[0] > self.divest_dwell[1] {
            return Err(Error::param("divest_dwell", "need min <= max"));
        }
        if self.retrieval_slots == 0 || self.retrieval_slots > 8 {
            return Err(Error::param("retrieval_slots", "must lie in 1..=8"));
        }
        if self.annotate_every == 0 {
            return Err(Error::param("annotate_every", "must be >= 1"));
        }
        if self.person_size.iter().chain(&self.bag_size).any(|s| !(*s > 0.0)) {
            return Err(Error::param("size", "object sizes must be > 0"));
        }
        Ok(())
    }

    pub fn camera(&self, id: CameraId) -> Result<&CameraSpec> {
        [&self.primary, &self.auxiliary]
            .into_iter()
            .find(|c| c.id == id)
            .ok_or(Error::UnknownCamera(id))
    }

    fn size_of(&self, cls: ObjectClass) -> [f64; 2] {
        match cls {
            ObjectClass::Person => self.person_size,
            ObjectClass::Bag => self.bag_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub pos: Point2,
    /// Direction of the object's long axis, radians.
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub id: u32,
    pub cls: ObjectClass,
    pub start: FrameIdx,
    /// One sample per frame from `start`.
    pub samples: Vec<Sample>,
}

impl ObjectTrack {
    pub fn end(&self) -> FrameIdx {
        self.start + self.samples.len() as FrameIdx - 1
    }

    pub fn at(&self, frame: FrameIdx) -> Option<&Sample> {
        frame.checked_sub(self.start).and_then(|i| self.samples.get(i as usize))
    }
}

/// Contiguous run of frames in which one object is visible in one camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: u32,
    pub object: u32,
    pub camera: CameraId,
    pub cls: ObjectClass,
    pub start: FrameIdx,
    pub end: FrameIdx,
}

/// A passenger leaving the primary view and coming back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReentryEvent {
    pub person: u32,
    /// Primary-camera segment before leaving.
    pub left_segment: u32,
    /// Primary-camera segment after returning.
    pub returned_segment: u32,
    pub left_at: FrameIdx,
    pub returned_at: FrameIdx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub config: ScenarioConfig,
    pub frame_count: u32,
    pub objects: Vec<ObjectTrack>,
    /// Bag id to owner id.
    pub ownership: BTreeMap<u32, u32>,
    pub segments: Vec<Segment>,
    pub reentries: Vec<ReentryEvent>,
}

pub const BAG_ID_BASE: u32 = 1000;

struct Walker {
    id: u32,
    bound: f64,
    leg: usize,
    start: FrameIdx,
    samples: Vec<Sample>,
}

impl Walker {
    fn new(id: u32, start: FrameIdx, pos: Point2, heading: f64, bound: f64) -> Self {
        Self {
            id,
            bound,
            leg: 0,
            start,
            samples: vec![Sample { pos, heading }],
        }
    }

    fn now(&self) -> FrameIdx {
        self.start + self.samples.len() as FrameIdx - 1
    }

    fn last(&self) -> Sample {
        *self.samples.last().expect("walker has a sample")
    }

    /// Move in a straight line reaching `to` after `frames` frames.
    fn move_in(&mut self, to: Point2, frames: u32) -> Result<()> {
        self.leg += 1;
        let from = self.last();
        let dist = from.pos.distance(&to);
        let frames = frames.max(1);
        let speed = dist / frames as f64;
        if speed > self.bound + 1e-9 {
            return Err(Error::InfeasibleWaypoints {
                object: self.id,
                leg: self.leg,
                speed,
                bound: self.bound,
            });
        }
        let heading = if dist > 1e-9 {
            (to.y - from.pos.y).atan2(to.x - from.pos.x)
        } else {
            from.heading
        };
        for i in 1..=frames {
            let t = i as f64 / frames as f64;
            let pos = Point2::new(
                from.pos.x + t * (to.x - from.pos.x),
                from.pos.y + t * (to.y - from.pos.y),
            );
            self.samples.push(Sample { pos, heading });
        }
        Ok(())
    }

    fn move_to(&mut self, to: Point2, speed: f64) -> Result<()> {
        let dist = self.last().pos.distance(&to);
        if dist < 1e-9 {
            return Ok(());
        }
        let frames = (dist / speed).ceil() as u32;
        self.move_in(to, frames)
    }

    fn hold_until(&mut self, frame: FrameIdx) {
        let s = self.last();
        while self.now() < frame {
            self.samples.push(s);
        }
    }

    fn hold(&mut self, frames: u32) {
        let until = self.now() + frames;
        self.hold_until(until);
    }

    /// Follow `leader` at a fixed offset through frame `until`.
    fn follow(&mut self, leader: &Walker, offset: Point2, until: FrameIdx) {
        while self.now() < until {
            let f = self.now() + 1;
            let s = leader.samples[(f - leader.start) as usize];
            self.samples.push(Sample {
                pos: s.pos + offset,
                heading: s.heading,
            });
        }
    }

    fn into_track(self, cls: ObjectClass) -> ObjectTrack {
        ObjectTrack {
            id: self.id,
            cls,
            start: self.start,
            samples: self.samples,
        }
    }
}

fn slot_x(i: usize) -> f64 {
    1450.0 + 90.0 * i as f64
}

const ENTRY: Point2 = Point2::new(20.0, 450.0);
const DIVEST: Point2 = Point2::new(300.0, 450.0);
const SCREEN: Point2 = Point2::new(650.0, 450.0);
const BELT_IN: Point2 = Point2::new(300.0, 300.0);
const EXCURSION_X: f64 = 900.0;
const EXIT_X: f64 = 2180.0;
const LANE_ENTRY: f64 = 450.0;
const LANE_WAIT: f64 = 500.0;
const LANE_EXIT: f64 = 380.0;
const ROW_BELT: f64 = 300.0;
const ROW_PARK: f64 = 240.0;

/// Build ground-truth trajectories for every passenger and bag.
pub fn generate(cfg: &ScenarioConfig) -> Result<ScenarioTruth> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[cfg.seed, 0x5ce0_a410]));
    let p = cfg.passengers;
    let v = cfg.walk_speed;
    for speed in [cfg.walk_speed, cfg.belt_speed] {
        if speed > cfg.max_speed {
            return Err(Error::InfeasibleWaypoints {
                object: 0,
                leg: 0,
                speed,
                bound: cfg.max_speed,
            });
        }
    }

    let mut objects = Vec::new();
    let mut ownership = BTreeMap::new();
    let mut slot_free = vec![0 as FrameIdx; cfg.retrieval_slots];
    let mut reentry_index = 0usize;

    for k in 0..p {
        let pid = k as u32 + 1;
        let start = k as FrameIdx * cfg.arrival_interval;
        let mut person = Walker::new(pid, start, ENTRY, 0.0, cfg.max_speed);
        person.move_to(DIVEST, v)?;
        let t_divest = person.now();
        let dwell = rng.random_range(cfg.divest_dwell[0]..=cfg.divest_dwell[1]);
        person.hold(dwell);
        person.move_to(SCREEN, v)?;
        person.hold(cfg.screening_dwell);

        let my_bags: Vec<usize> = (0..cfg.bags).filter(|b| b % p == k).collect();
        let slot = {
            let first = k % cfg.retrieval_slots;
            (0..cfg.retrieval_slots)
                .map(|i| (first + i) % cfg.retrieval_slots)
                .find(|&i| my_bags.is_empty() || slot_free[i] <= t_divest)
                .ok_or_else(|| Error::param("retrieval_slots", format!("no free slot for passenger {pid}")))?
        };
        let sx = slot_x(slot);

        // bags ride to the slot while the owner walks there
        let nb = my_bags.len();
        let mut bag_walkers = Vec::new();
        let mut parked = 0;
        for (j, &b) in my_bags.iter().enumerate() {
            let bid = BAG_ID_BASE + b as u32 + 1;
            ownership.insert(bid, pid);
            let dx = if nb > 1 { 30.0 - 60.0 * j as f64 } else { 0.0 };
            let carry = Point2::new(dx, 40.0);
            let mut bag = Walker::new(bid, start, ENTRY + carry, 0.0, cfg.max_speed);
            bag.follow(&person, carry, t_divest + 15 * j as FrameIdx);
            bag.move_in(BELT_IN, 30)?;
            bag.move_to(Point2::new(sx + dx, ROW_BELT), cfg.belt_speed)?;
            bag.move_in(Point2::new(sx + dx, ROW_PARK), 15)?;
            parked = parked.max(bag.now());
            bag_walkers.push((bag, dx));
        }

        person.move_to(Point2::new(sx, LANE_ENTRY), v)?;
        person.move_to(Point2::new(sx, LANE_WAIT), v)?;

        let excursions = reentries_for(k, p, cfg.reentries);
        for _ in 0..excursions {
            let lane = 590.0 + 50.0 * (reentry_index % 3) as f64;
            reentry_index += 1;
            person.move_to(Point2::new(sx, lane), v)?;
            person.move_to(Point2::new(EXCURSION_X, lane), v)?;
            person.hold(cfg.excursion_dwell);
            person.move_to(Point2::new(sx, lane), v)?;
            person.move_to(Point2::new(sx, LANE_WAIT), v)?;
        }
        if nb > 0 {
            person.hold_until(parked + 5);
        }
        person.move_to(Point2::new(sx, LANE_EXIT), v)?;
        let t_pick = person.now();
        for (bag, dx) in &mut bag_walkers {
            bag.hold_until(t_pick - 25);
            bag.move_in(Point2::new(sx + *dx, LANE_EXIT - 40.0), 25)?;
        }
        if nb > 0 {
            slot_free[slot] = t_pick;
        }
        person.move_to(Point2::new(EXIT_X, LANE_EXIT), v)?;
        let end = person.now();
        for (mut bag, dx) in bag_walkers {
            bag.follow(&person, Point2::new(dx, -40.0), end);
            objects.push(bag.into_track(ObjectClass::Bag));
        }
        objects.push(person.into_track(ObjectClass::Person));
    }
    objects.sort_by_key(|o| o.id);

    let frame_count =
        objects.iter().map(|o| o.end() + 1).max().unwrap_or(0) + if objects.is_empty() { 0 } else { cfg.tail_frames };
    let segments = find_segments(cfg, &objects)?;
    let reentries = find_reentries(cfg, &segments);
    Ok(ScenarioTruth {
        config: cfg.clone(),
        frame_count,
        objects,
        ownership,
        segments,
        reentries,
    })
}

fn reentries_for(k: usize, p: usize, total: usize) -> usize {
    total / p + usize::from(k < total % p)
}

fn find_segments(cfg: &ScenarioConfig, objects: &[ObjectTrack]) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for cam in [&cfg.primary, &cfg.auxiliary] {
        let mut runs = Vec::new();
        for o in objects {
            let mut open: Option<FrameIdx> = None;
            for (i, s) in o.samples.iter().enumerate() {
                let f = o.start + i as FrameIdx;
                let seen = cam.sees(cam.to_image(s.pos)?);
                match (seen, open) {
                    (true, None) => open = Some(f),
                    (false, Some(b)) => {
                        runs.push((b, o.id, o.cls, f - 1));
                        open = None;
                    }
                    _ => {}
                }
            }
            if let Some(b) = open {
                runs.push((b, o.id, o.cls, o.end()));
            }
        }
        runs.sort();
        for (i, (start, object, cls, end)) in runs.into_iter().enumerate() {
            out.push(Segment {
                id: i as u32 + 1,
                object,
                camera: cam.id,
                cls,
                start,
                end,
            });
        }
    }
    Ok(out)
}

fn find_reentries(cfg: &ScenarioConfig, segments: &[Segment]) -> Vec<ReentryEvent> {
    let mut per_person: BTreeMap<u32, Vec<&Segment>> = BTreeMap::new();
    for s in segments {
        if s.camera == cfg.primary.id && s.cls == ObjectClass::Person {
            per_person.entry(s.object).or_default().push(s);
        }
    }
    let mut out = Vec::new();
    for (person, segs) in per_person {
        for w in segs.windows(2) {
            out.push(ReentryEvent {
                person,
                left_segment: w[0].id,
                returned_segment: w[1].id,
                left_at: w[0].end,
                returned_at: w[1].start,
            });
        }
    }
    out.sort_by_key(|e| (e.returned_at, e.person));
    out
}

/// One object instance as the detector sees it, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u32,
    pub cls: ObjectClass,
    pub center: Point2,
    pub size: [f64; 2],
    pub heading: f64,
}

impl ObjectInstance {
    pub fn footprint(&self) -> Polygon {
        Polygon::oriented_rect(self.center, self.size[0], self.size[1], self.heading)
    }
}

/// 64-bit mixing of several words (splitmix64 finalizer per word).
pub fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        let mut z = h ^ w.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

fn detector_rng(seed: u64, frame: FrameIdx, theta: f64, camera: CameraId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(&[seed, frame as u64, theta.to_bits(), camera as u64]))
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
    } else {
        0.0
    }
}

/// Direction of a projected footprint's first edge.
fn image_heading(fp: &Polygon) -> f64 {
    let (a, b) = (fp.vertices[0], fp.vertices[1]);
    (b.y - a.y).atan2(b.x - a.x)
}

/// Simulated detector output for one camera, frame and rotation angle, in
/// the coordinates of the rotated ROI canvas.
#[allow(clippy::too_many_arguments)]
pub fn detect_objects(
    objects: &[ObjectInstance],
    camera: &CameraSpec,
    noise: &NoiseModel,
    seed: u64,
    frame: FrameIdx,
    theta: f64,
    eta_det: f64,
) -> Result<Vec<Detection>> {
    let mut rng = detector_rng(seed, frame, theta, camera.id);
    let roi = &camera.roi;
    let mut out = Vec::new();
    for o in objects {
        let c_img = camera.to_image(o.center)?;
        if !camera.sees(c_img) {
            continue;
        }
        // draw every random number up front so one object's outcome does not
        // shift the stream for the next
        let u: f64 = rng.random();
        let (dw, dh) = (
            gaussian(&mut rng, noise.size_jitter),
            gaussian(&mut rng, noise.size_jitter),
        );
        let (dx, dy) = (
            gaussian(&mut rng, noise.center_jitter),
            gaussian(&mut rng, noise.center_jitter),
        );
        let score = uniform(&mut rng, noise.score_range);

        let exact = o.footprint().map(|p| camera.to_image(p).unwrap_or(p));
        let phi = image_heading(&exact) + theta;
        if u >= noise.detection.probability(phi) || score < eta_det {
            continue;
        }
        let size = [(o.size[0] + dw).max(1.0), (o.size[1] + dh).max(1.0)];
        let jittered = Polygon::oriented_rect(o.center, size[0], size[1], o.heading)
            .map(|p| camera.to_image(p).unwrap_or(p))
            .translated(dx, dy);
        let canvas = jittered.map(|p| roi.to_canvas(p, theta));
        out.push(Detection::from_footprint(frame, camera.id, o.cls, canvas, score)?);
    }

    if noise.spurious_rate > 0.0 {
        let count = Poisson::new(noise.spurious_rate)
            .map_err(|e| Error::param("spurious_rate", e.to_string()))?
            .sample(&mut rng) as usize;
        for _ in 0..count {
            let cls = if rng.random_bool(0.5) {
                ObjectClass::Person
            } else {
                ObjectClass::Bag
            };
            let size = match cls {
                ObjectClass::Person => [56.0, 36.0],
                ObjectClass::Bag => [34.0, 24.0],
            };
            let c = Point2::new(rng.random_range(0.0..roi.rw), rng.random_range(0.0..roi.rh));
            let heading = rng.random_range(0.0..PI);
            let score = uniform(&mut rng, noise.spurious_score_range);
            if score < eta_det {
                continue;
            }
            let fp = Polygon::oriented_rect(c, size[0], size[1], heading);
            out.push(Detection::from_footprint(frame, camera.id, cls, fp, score)?);
        }
    }
    Ok(out)
}

impl ScenarioTruth {
    pub fn camera(&self, id: CameraId) -> Result<&CameraSpec> {
        self.config.camera(id)
    }

    pub fn camera_ids(&self) -> [CameraId; 2] {
        [self.config.primary.id, self.config.auxiliary.id]
    }

    /// Maps auxiliary image points into the primary image.
    pub fn handoff_homography(&self) -> Result<Homography> {
        let c = &self.config;
        c.primary
            .image_from_world
            .compose(&c.auxiliary.image_from_world.inverse()?)
    }

    /// Objects present at `frame`, in world coordinates.
    pub fn instances(&self, frame: FrameIdx) -> Vec<ObjectInstance> {
        self.objects
            .iter()
            .filter_map(|o| {
                o.at(frame).map(|s| ObjectInstance {
                    id: o.id,
                    cls: o.cls,
                    center: s.pos,
                    size: self.config.size_of(o.cls),
                    heading: s.heading,
                })
            })
            .collect()
    }

    pub fn mock_detect(&self, frame: FrameIdx, theta: f64, camera: CameraId, eta_det: f64) -> Result<Vec<Detection>> {
        let cam = self.camera(camera)?;
        detect_objects(
            &self.instances(frame),
            cam,
            &self.config.noise,
            self.config.seed,
            frame,
            theta,
            eta_det,
        )
    }

    /// All `n` rotated views of one frame.
    pub fn augmented_frame(&self, frame: FrameIdx, camera: CameraId, n: usize, eta_det: f64) -> Result<AugmentedFrame> {
        let cam = self.camera(camera)?;
        let per_angle = (0..n)
            .map(|i| self.mock_detect(frame, angle(i, n), camera, eta_det))
            .collect::<Result<Vec<_>>>()?;
        Ok(AugmentedFrame {
            frame,
            camera,
            roi: cam.roi,
            per_angle,
        })
    }

    /// Every frame of one camera; frames are rendered independently.
    pub fn render(&self, camera: CameraId, n: usize, eta_det: f64, exec: Exec) -> Result<Vec<AugmentedFrame>> {
        exec.map_range(0..self.frame_count as usize, |f| {
            self.augmented_frame(f as FrameIdx, camera, n, eta_det)
        })
        .into_iter()
        .collect()
    }

    fn segment_id(&self, camera: CameraId, object: u32, frame: FrameIdx) -> Option<u32> {
        self.segments
            .iter()
            .find(|s| s.camera == camera && s.object == object && s.start <= frame && frame <= s.end)
            .map(|s| s.id)
    }

    /// Visible ground-truth boxes of one camera. Box ids are segment ids, so
    /// a passenger who re-enters the view gets a new id.
    pub fn ground_truth(&self, camera: CameraId) -> Result<GroundTruth> {
        self.boxes(camera, false)
    }

    /// Like [`ScenarioTruth::ground_truth`] but with global object ids, which
    /// stay the same across re-entries and cameras.
    pub fn ground_truth_global(&self, camera: CameraId) -> Result<GroundTruth> {
        self.boxes(camera, true)
    }

    fn boxes(&self, camera: CameraId, global: bool) -> Result<GroundTruth> {
        let cam = self.camera(camera)?;
        let mut boxes = Vec::new();
        for f in 0..self.frame_count {
            for o in self.instances(f) {
                let c = cam.to_image(o.center)?;
                if !cam.sees(c) {
                    continue;
                }
                let fp = o.footprint().map(|p| cam.to_image(p).unwrap_or(p));
                let b = polygon_bbox(&fp)?;
                let id = if global {
                    o.id
                } else {
                    self.segment_id(camera, o.id, f)
                        .expect("visible objects lie in a segment")
                };
                boxes.push(GtBox {
                    frame: f,
                    camera,
                    cls: o.cls,
                    id,
                    bbox: BBox { cx: c.x, cy: c.y, ..b },
                });
            }
        }
        let every = self.config.annotate_every;
        Ok(GroundTruth {
            boxes: boxes.into_iter().filter(|b| b.frame % every == 0).collect(),
            annotated: (0..self.frame_count).filter(|f| f % every == 0).collect(),
        })
    }

    /// Global object id of each segment id, per camera.
    pub fn segment_objects(&self, camera: CameraId) -> BTreeMap<u32, u32> {
        self.segments
            .iter()
            .filter(|s| s.camera == camera)
            .map(|s| (s.id, s.object))
            .collect()
    }

    /// Noise-free tracklets: one per segment, labeled with the segment id.
    pub fn gt_tracklets(&self, camera: CameraId, cls: ObjectClass) -> Result<Vec<Tracklet>> {
        let gt = self.ground_truth(camera)?;
        let mut by_id: BTreeMap<u32, Vec<(FrameIdx, BBox)>> = BTreeMap::new();
        for b in gt.boxes.iter().filter(|b| b.cls == cls) {
            by_id.entry(b.id).or_default().push((b.frame, b.bbox));
        }
        Ok(by_id
            .into_iter()
            .map(|(id, entries)| Tracklet {
                label: id,
                camera,
                cls,
                entries,
            })
            .collect())
    }
}
