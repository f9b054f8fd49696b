//! File formats.
//!
//! * Detections, fused detections, tracklets and ledgers: line-delimited
//!   JSON. The first line is a header naming the format and version; every
//!   later line is one record.
//! * Homographies, configs, reports and manifests: one JSON document.
//! * Ground truth and track exports: MOT-style CSV
//!   `frame,id,x,y,w,h,score,class,camera` with `x, y` the top-left corner.
//!   Comment lines start with `#`; `# annotated_frames=0-99,120` lists the
//!   annotated frames.
//!
//! Boxes in JSON records are center format `{cx, cy, w, h}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::bagassoc::{AssociationLedger, LedgerEntry};
use crate::error::{Error, Result};
use crate::fusion::{AugmentedFrame, Detection};
use crate::geometry::{BBox, Homography, Polygon, Roi};
use crate::metrics::{GroundTruth, GtBox};
use crate::tracker::TrackedBox;
use crate::tracklets::Tracklet;
use crate::{CameraId, FrameIdx, Label, ObjectClass};

pub const FORMAT_VERSION: u32 = 1;
pub const DETECTIONS_FORMAT: &str = "checkpoint-detections";
pub const FUSED_FORMAT: &str = "checkpoint-fused";
pub const OCCUPANCY_FORMAT: &str = "checkpoint-occupancy";
pub const TRACKLETS_FORMAT: &str = "checkpoint-tracklets";
pub const LEDGER_FORMAT: &str = "checkpoint-ledger";
pub const HOMOGRAPHY_FORMAT: &str = "checkpoint-homography";
pub const MOT_HEADER: &str = "frame,id,x,y,w,h,score,class,camera";

/// Per-camera stream description carried in JSONL headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraHeader {
    pub id: CameraId,
    pub roi: Roi,
    /// Frames `0..frame_count` belong to the stream.
    pub frame_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_angles: Option<usize>,
    #[serde(default)]
    cameras: Vec<CameraHeader>,
}

impl Header {
    fn new(format: &str, n_angles: Option<usize>, cameras: Vec<CameraHeader>) -> Self {
        Self {
            format: format.to_string(),
            version: FORMAT_VERSION,
            n_angles,
            cameras,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write a file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_pretty(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        field: "document".into(),
        message: e.to_string(),
    })
}

struct Ctx<'a> {
    path: &'a Path,
    line: usize,
}

impl Ctx<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn field<'v>(&self, obj: &'v Map<String, Value>, name: &str) -> Result<&'v Value> {
        obj.get(name).ok_or_else(|| self.err(name, "missing"))
    }

    fn u32(&self, obj: &Map<String, Value>, name: &str) -> Result<u32> {
        self.field(obj, name)?
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| self.err(name, "expected a non-negative 32-bit integer"))
    }

    fn f64(&self, obj: &Map<String, Value>, name: &str) -> Result<f64> {
        self.field(obj, name)?
            .as_f64()
            .ok_or_else(|| self.err(name, "expected a number"))
    }

    fn typed<T: DeserializeOwned>(&self, v: &Value, name: &str) -> Result<T> {
        T::deserialize(v).map_err(|e| self.err(name, e.to_string()))
    }

    fn reject_unknown(&self, obj: &Map<String, Value>, known: &[&str]) -> Result<()> {
        match obj.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(self.err(k, "unknown field")),
            None => Ok(()),
        }
    }
}

/// Non-blank lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Record objects keyed by their 1-based line number.
type Records = Vec<(usize, Map<String, Value>)>;

/// Split a JSONL document into its header and record objects. An empty
/// document yields `None`.
fn read_jsonl(text: &str, path: &Path, format: &str) -> Result<Option<(Header, Records)>> {
    let mut it = lines(text);
    let Some((hl, first)) = it.next() else {
        return Ok(None);
    };
    let ctx = Ctx { path, line: hl };
    let header: Header = serde_json::from_str(first).map_err(|e| ctx.err("header", e.to_string()))?;
    if header.format != format {
        return Err(ctx.err("format", format!("expected `{format}`, found `{}`", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(ctx.err("version", format!("unsupported version {}", header.version)));
    }
    let mut records = Vec::new();
    for (line, l) in it {
        let ctx = Ctx { path, line };
        match serde_json::from_str::<Value>(l).map_err(|e| ctx.err("record", e.to_string()))? {
            Value::Object(m) => records.push((line, m)),
            _ => return Err(ctx.err("record", "expected a JSON object")),
        }
    }
    Ok(Some((header, records)))
}

fn jsonl_string<T: Serialize>(header: &Header, records: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = serde_json::to_string(header)?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(&r)?);
        out.push('\n');
    }
    Ok(out)
}

const DETECTION_FIELDS: &[&str] = &["frame", "camera", "cls", "box", "score", "footprint", "angle_index"];

fn parse_detection(ctx: &Ctx, obj: &Map<String, Value>) -> Result<Detection> {
    ctx.reject_unknown(obj, DETECTION_FIELDS)?;
    let frame = ctx.u32(obj, "frame")?;
    let camera = ctx.u32(obj, "camera")?;
    let cls_text = ctx
        .field(obj, "cls")?
        .as_str()
        .ok_or_else(|| ctx.err("cls", "expected a string"))?;
    let cls: ObjectClass = cls_text
        .parse()
        .map_err(|_| ctx.err("cls", format!("unknown class `{cls_text}`")))?;
    let score = ctx.f64(obj, "score")?;
    if !(0.0..=1.0).contains(&score) {
        return Err(ctx.err("score", format!("{score} is outside [0, 1]")));
    }
    let bbox: BBox = ctx.typed(ctx.field(obj, "box")?, "box")?;
    bbox.validate().map_err(|e| ctx.err("box", e.to_string()))?;
    let footprint = match obj.get("footprint") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let p: Polygon = ctx.typed(v, "footprint")?;
            Some(Polygon::new(p.vertices).map_err(|e| ctx.err("footprint", e.to_string()))?)
        }
    };
    let angle_index = match obj.get("angle_index") {
        None | Some(Value::Null) => None,
        Some(_) => Some(ctx.u32(obj, "angle_index")?),
    };
    let d = Detection {
        frame,
        camera,
        cls,
        bbox,
        score,
        footprint,
        angle_index,
    };
    d.validate().map_err(|e| ctx.err("footprint", e.to_string()))?;
    Ok(d)
}

/// Camera headers for a set of frames, in order of first appearance.
pub fn camera_headers(frames: &[AugmentedFrame]) -> Result<Vec<CameraHeader>> {
    let mut out: Vec<CameraHeader> = Vec::new();
    for af in frames {
        match out.iter_mut().find(|c| c.id == af.camera) {
            Some(c) => {
                if c.roi != af.roi {
                    return Err(Error::param(
                        "roi",
                        format!("camera {} changes its ROI at frame {}", af.camera, af.frame),
                    ));
                }
                c.frame_count = c.frame_count.max(af.frame + 1);
            }
            None => out.push(CameraHeader {
                id: af.camera,
                roi: af.roi,
                frame_count: af.frame + 1,
            }),
        }
    }
    Ok(out)
}

/// Serialize augmented frames; every frame must have the same number of
/// angle slots.
pub fn detections_to_string(frames: &[AugmentedFrame]) -> Result<String> {
    let n = frames.first().map_or(0, AugmentedFrame::n_angles);
    if let Some(af) = frames.iter().find(|af| af.n_angles() != n) {
        return Err(Error::param(
            "per_angle",
            format!("frame {} has {} slots, expected {n}", af.frame, af.n_angles()),
        ));
    }
    let header = Header::new(DETECTIONS_FORMAT, Some(n), camera_headers(frames)?);
    let records = frames.iter().flat_map(|af| {
        af.per_angle.iter().enumerate().flat_map(move |(i, set)| {
            set.iter().map(move |d| Detection {
                angle_index: Some(i as u32),
                ..d.clone()
            })
        })
    });
    jsonl_string(&header, records)
}

pub fn write_detections(path: &Path, frames: &[AugmentedFrame]) -> Result<()> {
    write_text(path, &detections_to_string(frames)?)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedDetections {
    /// One frame per camera and frame index, cameras in header order.
    pub frames: Vec<AugmentedFrame>,
    pub n_angles: usize,
    /// Angle slots without records in frames where other slots have some.
    pub missing_slots: usize,
}

pub fn parse_detections_str(text: &str, path: &Path) -> Result<ParsedDetections> {
    let Some((header, records)) = read_jsonl(text, path, DETECTIONS_FORMAT)? else {
        return Ok(ParsedDetections::default());
    };
    let hctx = Ctx { path, line: 1 };
    let n = header.n_angles.ok_or_else(|| hctx.err("n_angles", "missing"))?;
    if n == 0 {
        return Err(hctx.err("n_angles", "must be >= 1"));
    }
    let mut index: BTreeMap<CameraId, usize> = BTreeMap::new();
    let mut frames = Vec::new();
    for cam in &header.cameras {
        if index.insert(cam.id, frames.len()).is_some() {
            return Err(hctx.err("cameras", format!("camera {} listed twice", cam.id)));
        }
        frames.extend((0..cam.frame_count).map(|f| AugmentedFrame::empty(f, cam.id, cam.roi, n)));
    }
    for (line, obj) in &records {
        let ctx = Ctx { path, line: *line };
        let mut d = parse_detection(&ctx, obj)?;
        let slot = d.angle_index.take().ok_or_else(|| ctx.err("angle_index", "missing"))? as usize;
        if slot >= n {
            return Err(ctx.err("angle_index", format!("{slot} is not below n_angles = {n}")));
        }
        let base = *index
            .get(&d.camera)
            .ok_or_else(|| ctx.err("camera", format!("camera {} is not in the header", d.camera)))?;
        let cam = header
            .cameras
            .iter()
            .find(|c| c.id == d.camera)
            .expect("indexed camera");
        if d.frame >= cam.frame_count {
            return Err(ctx.err(
                "frame",
                format!("{} is beyond frame_count {}", d.frame, cam.frame_count),
            ));
        }
        frames[base + d.frame as usize].per_angle[slot].push(d);
    }
    let missing_slots = frames
        .iter()
        .filter(|af| af.detection_count() > 0)
        .map(|af| af.per_angle.iter().filter(|s| s.is_empty()).count())
        .sum();
    if missing_slots > 0 {
        log::warn!(
            "{}: {missing_slots} angle slots without detections filled as empty",
            path.display()
        );
    }
    Ok(ParsedDetections {
        frames,
        n_angles: n,
        missing_slots,
    })
}

pub fn parse_detections(path: &Path) -> Result<ParsedDetections> {
    parse_detections_str(&read_text(path)?, path)
}

/// Fused detections in image coordinates, with the streams they came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusedDetections {
    pub cameras: Vec<CameraHeader>,
    pub detections: Vec<Detection>,
}

impl FusedDetections {
    /// Per-frame detection lists of one camera and class over its whole stream.
    pub fn stream(&self, camera: CameraId, cls: ObjectClass) -> Result<Vec<(FrameIdx, Vec<Detection>)>> {
        let cam = self
            .cameras
            .iter()
            .find(|c| c.id == camera)
            .ok_or(Error::UnknownCamera(camera))?;
        let mut out: Vec<(FrameIdx, Vec<Detection>)> = (0..cam.frame_count).map(|f| (f, Vec::new())).collect();
        for d in self.detections.iter().filter(|d| d.camera == camera && d.cls == cls) {
            let slot = out.get_mut(d.frame as usize).ok_or_else(|| {
                Error::param(
                    "frame",
                    format!("{} is beyond frame_count {}", d.frame, cam.frame_count),
                )
            })?;
            slot.1.push(d.clone());
        }
        Ok(out)
    }
}

pub fn fused_to_string(fused: &FusedDetections) -> Result<String> {
    jsonl_string(
        &Header::new(FUSED_FORMAT, None, fused.cameras.clone()),
        &fused.detections,
    )
}

pub fn parse_fused_str(text: &str, path: &Path) -> Result<FusedDetections> {
    let Some((header, records)) = read_jsonl(text, path, FUSED_FORMAT)? else {
        return Ok(FusedDetections::default());
    };
    let detections = records
        .iter()
        .map(|(line, obj)| {
            let ctx = Ctx { path, line: *line };
            let d = parse_detection(&ctx, obj)?;
            if !header.cameras.iter().any(|c| c.id == d.camera) {
                return Err(ctx.err("camera", format!("camera {} is not in the header", d.camera)));
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FusedDetections {
        cameras: header.cameras,
        detections,
    })
}

pub fn parse_fused(path: &Path) -> Result<FusedDetections> {
    parse_fused_str(&read_text(path)?, path)
}

/// Pooled per-angle detections in image coordinates, each tagged with its
/// angle index and score, for plotting occupancy.
pub fn occupancy_to_string(cameras: &[CameraHeader], pooled: &[Detection]) -> Result<String> {
    jsonl_string(&Header::new(OCCUPANCY_FORMAT, None, cameras.to_vec()), pooled)
}

/// Tracklets together with the streams they were built from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackletSet {
    pub cameras: Vec<CameraHeader>,
    pub tracklets: Vec<Tracklet>,
}

impl TrackletSet {
    pub fn select(&self, camera: CameraId, cls: ObjectClass) -> Vec<Tracklet> {
        self.tracklets
            .iter()
            .filter(|t| t.camera == camera && t.cls == cls)
            .cloned()
            .collect()
    }
}

pub fn tracklets_to_string(set: &TrackletSet) -> Result<String> {
    jsonl_string(
        &Header::new(TRACKLETS_FORMAT, None, set.cameras.clone()),
        &set.tracklets,
    )
}

pub fn parse_tracklets_str(text: &str, path: &Path) -> Result<TrackletSet> {
    let Some((header, records)) = read_jsonl(text, path, TRACKLETS_FORMAT)? else {
        return Ok(TrackletSet::default());
    };
    let tracklets = records
        .iter()
        .map(|(line, obj)| {
            let ctx = Ctx { path, line: *line };
            ctx.reject_unknown(obj, &["label", "camera", "cls", "entries"])?;
            ctx.u32(obj, "label")?;
            ctx.u32(obj, "camera")?;
            let t: Tracklet = ctx.typed(&Value::Object(obj.clone()), "entries")?;
            t.validate().map_err(|e| ctx.err("entries", e.to_string()))?;
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrackletSet {
        cameras: header.cameras,
        tracklets,
    })
}

pub fn parse_tracklets(path: &Path) -> Result<TrackletSet> {
    parse_tracklets_str(&read_text(path)?, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LedgerRecord {
    Entry {
        camera: CameraId,
        #[serde(flatten)]
        entry: LedgerEntry,
    },
    Unassociated {
        camera: CameraId,
        bag: Label,
        frame: FrameIdx,
    },
}

/// Ownership ledgers keyed by camera.
pub fn ledgers_to_string(ledgers: &BTreeMap<CameraId, AssociationLedger>) -> Result<String> {
    let records = ledgers.iter().flat_map(|(&camera, l)| {
        l.entries()
            .map(move |&entry| LedgerRecord::Entry { camera, entry })
            .chain(
                l.unassociated()
                    .map(move |(bag, frame)| LedgerRecord::Unassociated { camera, bag, frame }),
            )
    });
    jsonl_string(&Header::new(LEDGER_FORMAT, None, Vec::new()), records)
}

pub fn parse_ledgers_str(text: &str, path: &Path) -> Result<BTreeMap<CameraId, AssociationLedger>> {
    let mut out: BTreeMap<CameraId, AssociationLedger> = BTreeMap::new();
    let Some((_, records)) = read_jsonl(text, path, LEDGER_FORMAT)? else {
        return Ok(out);
    };
    for (line, obj) in records {
        let ctx = Ctx { path, line };
        match ctx.typed::<LedgerRecord>(&Value::Object(obj), "kind")? {
            LedgerRecord::Entry { camera, entry } => {
                if !out.entry(camera).or_default().insert(entry) {
                    return Err(ctx.err("bag", format!("bag {} has two entries", entry.bag)));
                }
            }
            LedgerRecord::Unassociated { camera, bag, frame } => {
                out.entry(camera).or_default().mark_unassociated(bag, frame);
            }
        }
    }
    Ok(out)
}

pub fn parse_ledgers(path: &Path) -> Result<BTreeMap<CameraId, AssociationLedger>> {
    parse_ledgers_str(&read_text(path)?, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HomographyFile {
    format: String,
    version: u32,
    matrix: [[f64; 3]; 3],
}

pub fn homography_to_string(h: &Homography) -> Result<String> {
    to_json_pretty(&HomographyFile {
        format: HOMOGRAPHY_FORMAT.into(),
        version: FORMAT_VERSION,
        matrix: h.matrix(),
    })
}

/// Accepts either the versioned document or a bare 3x3 array.
pub fn parse_homography_str(text: &str, path: &Path) -> Result<Homography> {
    let ctx = Ctx { path, line: 1 };
    let v: Value = serde_json::from_str(text).map_err(|e| ctx.err("document", e.to_string()))?;
    let m: [[f64; 3]; 3] = match &v {
        Value::Array(_) => ctx.typed(&v, "matrix")?,
        Value::Object(obj) => {
            let f: HomographyFile = ctx.typed(&v, "matrix")?;
            if f.format != HOMOGRAPHY_FORMAT {
                return Err(ctx.err("format", format!("expected `{HOMOGRAPHY_FORMAT}`")));
            }
            ctx.reject_unknown(obj, &["format", "version", "matrix"])?;
            f.matrix
        }
        _ => return Err(ctx.err("matrix", "expected a 3x3 array")),
    };
    Homography::new(m)
}

pub fn load_homography(path: &Path) -> Result<Homography> {
    parse_homography_str(&read_text(path)?, path)
}

pub fn write_homography(path: &Path, h: &Homography) -> Result<()> {
    write_text(path, &homography_to_string(h)?)
}

/// `0-3,7,9-10` style list.
pub fn format_frame_ranges(frames: &BTreeSet<FrameIdx>) -> String {
    let mut out = String::new();
    let mut it = frames.iter().copied().peekable();
    while let Some(start) = it.next() {
        let mut end = start;
        while it.peek() == Some(&(end + 1)) {
            end = it.next().expect("peeked");
        }
        if !out.is_empty() {
            out.push(',');
        }
        if end == start {
            let _ = write!(out, "{start}");
        } else {
            let _ = write!(out, "{start}-{end}");
        }
    }
    out
}

pub fn parse_frame_ranges(text: &str) -> std::result::Result<BTreeSet<FrameIdx>, String> {
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part.split_once('-').unwrap_or((part, part));
        let a: FrameIdx = a.trim().parse().map_err(|_| format!("bad frame `{a}`"))?;
        let b: FrameIdx = b.trim().parse().map_err(|_| format!("bad frame `{b}`"))?;
        if b < a {
            return Err(format!("descending range `{part}`"));
        }
        out.extend(a..=b);
    }
    Ok(out)
}

/// One row of a MOT-style CSV file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRow {
    pub frame: FrameIdx,
    pub id: u32,
    pub bbox: BBox,
    pub score: f64,
    pub cls: ObjectClass,
    pub camera: CameraId,
}

fn mot_string(rows: impl IntoIterator<Item = MotRow>, annotated: Option<&BTreeSet<FrameIdx>>) -> String {
    let mut out = format!("# format={} version={FORMAT_VERSION}\n", "checkpoint-mot");
    if let Some(a) = annotated {
        let _ = writeln!(out, "# annotated_frames={}", format_frame_ranges(a));
    }
    out.push_str(MOT_HEADER);
    out.push('\n');
    for r in rows {
        let b = r.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.frame,
            r.id,
            b.left(),
            b.top(),
            b.w,
            b.h,
            r.score,
            r.cls,
            r.camera
        );
    }
    out
}

/// Rows of a MOT-style CSV and the annotated-frame directive, if present.
pub fn parse_mot_str(text: &str, path: &Path) -> Result<(Vec<MotRow>, Option<BTreeSet<FrameIdx>>)> {
    let mut rows = Vec::new();
    let mut annotated = None;
    for (line, l) in lines(text) {
        let ctx = Ctx { path, line };
        if let Some(c) = l.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("annotated_frames=") {
                annotated = Some(parse_frame_ranges(v).map_err(|m| ctx.err("annotated_frames", m))?);
            }
            continue;
        }
        if l == MOT_HEADER {
            continue;
        }
        let cols: Vec<&str> = l.split(',').map(str::trim).collect();
        if cols.len() != 9 {
            return Err(ctx.err("row", format!("expected 9 columns, found {}", cols.len())));
        }
        let names = ["frame", "id", "x", "y", "w", "h", "score", "class", "camera"];
        let int = |i: usize| -> Result<u32> {
            cols[i]
                .parse()
                .map_err(|_| ctx.err(names[i], format!("`{}` is not a non-negative integer", cols[i])))
        };
        let num = |i: usize| -> Result<f64> {
            cols[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ctx.err(names[i], format!("`{}` is not a finite number", cols[i])))
        };
        let (w, h) = (num(4)?, num(5)?);
        if !(w > 0.0) {
            return Err(ctx.err("w", "must be positive"));
        }
        if !(h > 0.0) {
            return Err(ctx.err("h", "must be positive"));
        }
        let score = num(6)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(ctx.err("score", format!("{score} is outside [0, 1]")));
        }
        let cls = cols[7]
            .parse()
            .map_err(|_| ctx.err("class", format!("unknown class `{}`", cols[7])))?;
        rows.push(MotRow {
            frame: int(0)?,
            id: int(1)?,
            bbox: BBox::from_corner(num(2)?, num(3)?, w, h).map_err(|e| ctx.err("x", e.to_string()))?,
            score,
            cls,
            camera: int(8)?,
        });
    }
    Ok((rows, annotated))
}

pub fn ground_truth_to_string(gt: &GroundTruth) -> String {
    mot_string(
        gt.boxes.iter().map(|b| MotRow {
            frame: b.frame,
            id: b.id,
            bbox: b.bbox,
            score: 1.0,
            cls: b.cls,
            camera: b.camera,
        }),
        Some(&gt.annotated),
    )
}

/// Without an `annotated_frames` directive every frame holding a box counts
/// as annotated.
pub fn parse_ground_truth_str(text: &str, path: &Path) -> Result<GroundTruth> {
    let (rows, annotated) = parse_mot_str(text, path)?;
    let boxes = rows
        .into_iter()
        .map(|r| GtBox {
            frame: r.frame,
            camera: r.camera,
            cls: r.cls,
            id: r.id,
            bbox: r.bbox,
        })
        .collect();
    Ok(match annotated {
        Some(annotated) => GroundTruth { boxes, annotated },
        None => GroundTruth::from_boxes(boxes),
    })
}

pub fn parse_ground_truth(path: &Path) -> Result<GroundTruth> {
    parse_ground_truth_str(&read_text(path)?, path)
}

pub fn tracks_to_string(tracks: &[TrackedBox]) -> String {
    mot_string(
        tracks.iter().map(|t| MotRow {
            frame: t.frame,
            id: t.label,
            bbox: t.bbox,
            score: 1.0,
            cls: t.cls,
            camera: t.camera,
        }),
        None,
    )
}

pub fn parse_tracks_str(text: &str, path: &Path) -> Result<Vec<TrackedBox>> {
    Ok(parse_mot_str(text, path)?
        .0
        .into_iter()
        .map(|r| TrackedBox {
            frame: r.frame,
            camera: r.camera,
            cls: r.cls,
            label: r.id,
            bbox: r.bbox,
        })
        .collect())
}
