//! Tracklet stitching within a camera and identity handoff across cameras.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{hausdorff, iou, project_point, BBox, Homography, Point2};
use crate::{CameraId, FrameIdx, Label, ObjectClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub label: Label,
    pub camera: CameraId,
    pub cls: ObjectClass,
    /// `(frame, box)` with strictly increasing frames.
    pub entries: Vec<(FrameIdx, BBox)>,
}

impl Tracklet {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyInput("tracklet has no entries"));
        }
        for w in self.entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::OutOfOrder {
                    prev: w[0].0,
                    next: w[1].0,
                });
            }
        }
        for (_, b) in &self.entries {
            b.validate()?;
        }
        Ok(())
    }

    pub fn first_frame(&self) -> FrameIdx {
        self.entries[0].0
    }

    pub fn last_frame(&self) -> FrameIdx {
        self.entries[self.entries.len() - 1].0
    }

    pub fn first_box(&self) -> &BBox {
        &self.entries[0].1
    }

    pub fn last_box(&self) -> &BBox {
        &self.entries[self.entries.len() - 1].1
    }

    pub fn box_at(&self, frame: FrameIdx) -> Option<&BBox> {
        self.entries
            .binary_search_by_key(&frame, |e| e.0)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    /// Whether the frame spans `[first, last]` of the two tracklets intersect.
    pub fn overlaps_in_time(&self, other: &Tracklet) -> bool {
        self.first_frame() <= other.last_frame() && other.first_frame() <= self.last_frame()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StitchConfig {
    /// Largest frame gap bridged by stitching.
    pub t_th: u32,
    /// Pairs whose boundary boxes overlap by no more than this are never
    /// stitched. Zero keeps only pairs that overlap at all.
    pub min_iou: f64,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self { t_th: 30, min_iou: 0.0 }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_th == 0 {
            return Err(Error::param("t_th", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.min_iou) {
            return Err(Error::param("min_iou", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Cost of continuing `older` with `newer`: one minus the overlap of the
/// newer tracklet's first box with the older one's last box, when the newer
/// one starts within `t_th` frames after the older one ends.
pub fn stitch_cost(newer: &Tracklet, older: &Tracklet, t_th: u32) -> f64 {
    let (start, end) = (newer.first_frame() as i64, older.last_frame() as i64);
    let gap = start - end;
    if gap > 0 && gap <= t_th as i64 && newer.cls == older.cls {
        1.0 - iou(newer.first_box(), older.last_box())
    } else {
        f64::INFINITY
    }
}

fn gated_stitch_cost(newer: &Tracklet, older: &Tracklet, cfg: &StitchConfig) -> f64 {
    let c = stitch_cost(newer, older, cfg.t_th);
    if c.is_finite() && 1.0 - c <= cfg.min_iou {
        f64::INFINITY
    } else {
        c
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

fn sort_tracklets(ts: &mut [Tracklet]) {
    ts.sort_by_key(|a| (a.first_frame(), a.label));
}

/// Merge fragments of one camera's trajectories. Each round matches newer
/// tracklets to older ones with the Hungarian method and merges every
/// matched pair; rounds repeat until no finite-cost pair remains. A merged
/// tracklet keeps the label of its earliest fragment.
pub fn stitch(ts: &[Tracklet], cfg: &StitchConfig) -> Result<Vec<Tracklet>> {
    cfg.validate()?;
    if let Some(first) = ts.first() {
        if let Some(other) = ts.iter().find(|t| t.camera != first.camera) {
            return Err(Error::param(
                "tracklets",
                format!("stitching mixes cameras {} and {}", first.camera, other.camera),
            ));
        }
    }
    for t in ts {
        t.validate()?;
    }
    let mut cur = ts.to_vec();
    sort_tracklets(&mut cur);
    loop {
        let n = cur.len();
        let costs = CostMatrix::from_fn(n, n, |i, j| gated_stitch_cost(&cur[i], &cur[j], cfg))?;
        if !costs.has_finite() {
            break;
        }
        let a = solve(&costs);
        if a.is_empty() {
            break;
        }
        let mut uf = UnionFind::new(n);
        for &(newer, older) in &a.pairs {
            uf.union(newer, older);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let root = uf.find(i);
            groups.entry(root).or_default().push(i);
        }
        let mut next = Vec::with_capacity(groups.len());
        for members in groups.values() {
            // members are in start order, so the first carries the earlier label
            let mut merged = cur[members[0]].clone();
            for &i in &members[1..] {
                merged.entries.extend(cur[i].entries.iter().copied());
            }
            merged.entries.sort_by_key(|e| e.0);
            merged.entries.dedup_by_key(|e| e.0);
            next.push(merged);
        }
        sort_tracklets(&mut next);
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffConfig {
    /// Pairs whose Hausdorff distance reaches this many pixels are not linked.
    pub d_max: f64,
    /// Maps auxiliary image points into the primary image.
    pub homography: Homography,
}

impl HandoffConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > 0.0) {
            return Err(Error::param("d_max", "must be > 0"));
        }
        Ok(())
    }
}

/// Map a tracklet's box centers through `h`, keeping box sizes.
pub fn project_tracklet(t: &Tracklet, h: &Homography) -> Result<Tracklet> {
    let entries = t
        .entries
        .iter()
        .map(|&(f, b)| {
            let c = project_point(h, b.center())?;
            Ok((f, BBox { cx: c.x, cy: c.y, ..b }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Tracklet { entries, ..t.clone() })
}

/// Hausdorff distance between the box centers of two tracklets over the
/// frames both contain; infinite when they share no frame or the distance
/// is not below `d_max`.
pub fn handoff_cost(aux_projected: &Tracklet, primary: &Tracklet, d_max: f64) -> f64 {
    let (mut pa, mut pp) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    let (a, p) = (&aux_projected.entries, &primary.entries);
    while i < a.len() && j < p.len() {
        match a[i].0.cmp(&p[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                pa.push(a[i].1.center());
                pp.push(p[j].1.center());
                i += 1;
                j += 1;
            }
        }
    }
    if pa.is_empty() {
        return f64::INFINITY;
    }
    match hausdorff(&pp, &pa) {
        Ok(d) if d < d_max => d,
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffResult {
    /// Primary tracklets with their propagated labels.
    pub primary: Vec<Tracklet>,
    /// Auxiliary tracklets; those linked to a primary tracklet carry its
    /// component's primary label, the rest keep their own label.
    pub auxiliary: Vec<Tracklet>,
    /// Linked `(auxiliary label, primary label)` pairs, by input labels.
    pub edges: Vec<(Label, Label)>,
    /// Auxiliary label to the primary label it was mapped to.
    pub aux_to_primary: BTreeMap<Label, Label>,
}

/// Link auxiliary tracklets to primary ones and give every connected group
/// the smallest primary label in it.
///
/// Rounds of Hungarian matching run while finite costs remain. After a pair
/// `(a, p)` is linked, `p` is closed to every auxiliary tracklet that overlaps
/// `a` in time and `a` to every primary tracklet that overlaps `p`, so one
/// auxiliary tracklet can still link to several primary fragments that follow
/// each other.
pub fn associate_cameras(primary: &[Tracklet], auxiliary: &[Tracklet], cfg: &HandoffConfig) -> Result<HandoffResult> {
    cfg.validate()?;
    let projected = auxiliary
        .iter()
        .map(|t| project_tracklet(t, &cfg.homography))
        .collect::<Result<Vec<_>>>()?;
    let (na, np) = (auxiliary.len(), primary.len());
    let mut costs = CostMatrix::from_fn(na, np, |a, p| {
        if projected[a].cls == primary[p].cls {
            handoff_cost(&projected[a], &primary[p], cfg.d_max)
        } else {
            f64::INFINITY
        }
    })?;

    let mut edges: Vec<(usize, usize)> = Vec::new();
    while costs.has_finite() {
        let round = solve(&costs);
        if round.is_empty() {
            break;
        }
        for &(a, p) in &round.pairs {
            edges.push((a, p));
            costs.set(a, p, f64::INFINITY);
            for t in 0..na {
                if auxiliary[t].overlaps_in_time(&auxiliary[a]) {
                    costs.set(t, p, f64::INFINITY);
                }
            }
            for t in 0..np {
                if primary[t].overlaps_in_time(&primary[p]) {
                    costs.set(a, t, f64::INFINITY);
                }
            }
        }
    }

    // adjacency: primary nodes 0..np, auxiliary nodes np..np+na
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); np + na];
    for &(a, p) in &edges {
        adj[p].insert(np + a);
        adj[np + a].insert(p);
    }
    let mut component = vec![usize::MAX; np + na];
    let mut comp_label: Vec<Label> = Vec::new();
    for start in 0..np {
        if component[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let mut stack = vec![start];
        let mut min_label = Label::MAX;
        component[start] = id;
        while let Some(v) = stack.pop() {
            if v < np {
                min_label = min_label.min(primary[v].label);
            }
            for &w in &adj[v] {
                if component[w] == usize::MAX {
                    component[w] = id;
                    stack.push(w);
                }
            }
        }
        comp_label.push(min_label);
    }

    let primary_out: Vec<Tracklet> = primary
        .iter()
        .enumerate()
        .map(|(i, t)| Tracklet {
            label: comp_label[component[i]],
            ..t.clone()
        })
        .collect();
    let mut aux_to_primary = BTreeMap::new();
    let auxiliary_out: Vec<Tracklet> = auxiliary
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let c = component[np + i];
            let label = if c == usize::MAX {
                t.label
            } else {
                aux_to_primary.insert(t.label, comp_label[c]);
                comp_label[c]
            };
            Tracklet { label, ..t.clone() }
        })
        .collect();
    let mut label_edges: Vec<(Label, Label)> = edges
        .iter()
        .map(|&(a, p)| (auxiliary[a].label, primary[p].label))
        .collect();
    label_edges.sort_unstable();
    Ok(HandoffResult {
        primary: primary_out,
        auxiliary: auxiliary_out,
        edges: label_edges,
        aux_to_primary,
    })
}

/// Box centers of the tracklet, in frame order.
pub fn centroids(t: &Tracklet) -> Vec<Point2> {
    t.entries.iter().map(|(_, b)| b.center()).collect()
}
