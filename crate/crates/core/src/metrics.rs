//! Detection, tracking and identity metrics against ground truth.
//!
//! Only annotated frames are scored, so sparse annotations can be compared
//! with hypotheses produced at full frame rate. Ratios are fractions in
//! `[0, 1]` (MODA and MOTA may go negative); a ratio whose denominator is
//! zero is reported as 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::fusion::Detection;
use crate::geometry::{iou, BBox};
use crate::tracker::TrackedBox;
use crate::{CameraId, FrameIdx, Label, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub frame: FrameIdx,
    pub camera: CameraId,
    pub cls: ObjectClass,
    pub id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub boxes: Vec<GtBox>,
    /// Frames that were annotated, including ones with no objects.
    pub annotated: BTreeSet<FrameIdx>,
}

impl GroundTruth {
    /// Every frame that holds a box counts as annotated.
    pub fn from_boxes(boxes: Vec<GtBox>) -> Self {
        let annotated = boxes.iter().map(|b| b.frame).collect();
        Self { boxes, annotated }
    }

    pub fn filter(&self, camera: Option<CameraId>, cls: Option<ObjectClass>) -> GroundTruth {
        GroundTruth {
            boxes: self
                .boxes
                .iter()
                .filter(|b| camera.is_none_or(|c| b.camera == c) && cls.is_none_or(|c| b.cls == c))
                .copied()
                .collect(),
            annotated: self.annotated.clone(),
        }
    }

    /// Keep only the listed frames.
    pub fn subsample(&self, keep: impl Fn(FrameIdx) -> bool) -> GroundTruth {
        GroundTruth {
            boxes: self.boxes.iter().filter(|b| keep(b.frame)).copied().collect(),
            annotated: self.annotated.iter().copied().filter(|f| keep(*f)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatch {
    /// `(gt index, hyp index, iou)`.
    pub matches: Vec<(usize, usize, f64)>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
}

fn iou_costs(gt: &[BBox], hyp: &[BBox], gi: &[usize], hi: &[usize], thr: f64) -> CostMatrix {
    let mut c = CostMatrix::forbidden(gi.len(), hi.len());
    for (r, &g) in gi.iter().enumerate() {
        for (k, &h) in hi.iter().enumerate() {
            let v = iou(&gt[g], &hyp[h]);
            if v >= thr {
                c.set(r, k, 1.0 - v);
            }
        }
    }
    c
}

/// Maximum-cardinality, IoU-maximizing matching of one frame's boxes.
pub fn match_frame(gt: &[BBox], hyp: &[BBox], iou_thr: f64) -> FrameMatch {
    let gi: Vec<usize> = (0..gt.len()).collect();
    let hi: Vec<usize> = (0..hyp.len()).collect();
    let a = solve(&iou_costs(gt, hyp, &gi, &hi, iou_thr));
    let mut out = FrameMatch::default();
    let mut gm = vec![false; gt.len()];
    let mut hm = vec![false; hyp.len()];
    for &(g, h) in &a.pairs {
        gm[g] = true;
        hm[h] = true;
        out.matches.push((g, h, iou(&gt[g], &hyp[h])));
    }
    out.false_negatives = (0..gt.len()).filter(|&g| !gm[g]).collect();
    out.false_positives = (0..hyp.len()).filter(|&h| !hm[h]).collect();
    out
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub ids: u64,
    pub gt_total: u64,
    pub frames: u64,
    pub iou_sum: f64,
    pub gt_tracks: u64,
    pub mostly_tracked: u64,
    pub mostly_lost: u64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,

    pub recall: f64,
    pub precision: f64,
    pub moda: f64,
    pub mota: f64,
    pub motp: f64,
    pub far: f64,
    pub mt: f64,
    pub ml: f64,
    pub idf1: f64,
    pub idr: f64,
    pub idp: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl EvalReport {
    /// Report from raw detection counts; `gt_total` defaults to `tp + fn`.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, ids: u64) -> Self {
        let mut r = EvalReport {
            tp,
            fp,
            fn_,
            ids,
            gt_total: tp + fn_,
            ..Default::default()
        };
        r.finalize();
        r
    }

    /// Recompute the derived ratios from the counts.
    pub fn finalize(&mut self) {
        let gt = self.gt_total as f64;
        self.recall = ratio(self.tp as f64, (self.tp + self.fn_) as f64);
        self.precision = ratio(self.tp as f64, (self.tp + self.fp) as f64);
        self.moda = if gt > 0.0 {
            1.0 - (self.fp + self.fn_) as f64 / gt
        } else {
            0.0
        };
        self.mota = if gt > 0.0 {
            1.0 - (self.fp + self.fn_ + self.ids) as f64 / gt
        } else {
            0.0
        };
        self.motp = ratio(self.iou_sum, self.tp as f64);
        self.far = ratio(self.fp as f64, self.frames as f64);
        self.mt = ratio(self.mostly_tracked as f64, self.gt_tracks as f64);
        self.ml = ratio(self.mostly_lost as f64, self.gt_tracks as f64);
        self.idp = ratio(self.idtp as f64, (self.idtp + self.idfp) as f64);
        self.idr = ratio(self.idtp as f64, (self.idtp + self.idfn) as f64);
        self.idf1 = ratio(2.0 * self.idtp as f64, (2 * self.idtp + self.idfp + self.idfn) as f64);
    }

    /// One aligned text row with percentages, after [`EvalReport::table_header`].
    pub fn table_row(&self, name: &str) -> String {
        format!(
            "{:<20}{:>7.1}{:>7.1}{:>7}{:>7}{:>7}{:>7.1}{:>7.1}{:>7.1}{:>7.2}{:>6.0}{:>6.0}{:>6}{:>7.1}{:>7.1}{:>7.1}",
            name,
            100.0 * self.recall,
            100.0 * self.precision,
            self.tp,
            self.fp,
            self.fn_,
            100.0 * self.moda,
            100.0 * self.mota,
            100.0 * self.motp,
            self.far,
            100.0 * self.mt,
            100.0 * self.ml,
            self.ids,
            100.0 * self.idf1,
            100.0 * self.idr,
            100.0 * self.idp,
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<20}{:>7}{:>7}{:>7}{:>7}{:>7}{:>7}{:>7}{:>7}{:>7}{:>6}{:>6}{:>6}{:>7}{:>7}{:>7}",
            "",
            "Rcll",
            "Prcn",
            "TP",
            "FP",
            "FN",
            "MODA",
            "MOTA",
            "MOTP",
            "FAR",
            "MT",
            "ML",
            "IDs",
            "IDF1",
            "IDR",
            "IDP"
        )
    }
}

type FrameBoxes = BTreeMap<FrameIdx, Vec<(u32, BBox)>>;

fn gt_frames(gt: &GroundTruth) -> FrameBoxes {
    let mut m: FrameBoxes = gt.annotated.iter().map(|f| (*f, Vec::new())).collect();
    for b in &gt.boxes {
        if let Some(v) = m.get_mut(&b.frame) {
            v.push((b.id, b.bbox));
        }
    }
    for v in m.values_mut() {
        v.sort_by_key(|x| x.0);
    }
    m
}

fn hyp_frames<'a>(hyp: impl Iterator<Item = (FrameIdx, Label, BBox)> + 'a) -> FrameBoxes {
    let mut m: FrameBoxes = BTreeMap::new();
    for (f, l, b) in hyp {
        m.entry(f).or_default().push((l, b));
    }
    for v in m.values_mut() {
        // total order on content makes results independent of input order
        v.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.cx.total_cmp(&b.1.cx))
                .then(a.1.cy.total_cmp(&b.1.cy))
                .then(a.1.w.total_cmp(&b.1.w))
                .then(a.1.h.total_cmp(&b.1.h))
        });
    }
    m
}

fn boxes(v: &[(u32, BBox)]) -> Vec<BBox> {
    v.iter().map(|x| x.1).collect()
}

/// Detection metrics (TP, FP, FN, recall, precision, MODA, FAR).
pub fn evaluate_detection(gt: &GroundTruth, hyp: &[Detection], iou_thr: f64) -> EvalReport {
    let g = gt_frames(gt);
    let h = hyp_frames(hyp.iter().map(|d| (d.frame, 0, d.bbox)));
    let empty = Vec::new();
    let mut r = EvalReport::default();
    for (f, gv) in &g {
        let hv = h.get(f).unwrap_or(&empty);
        let m = match_frame(&boxes(gv), &boxes(hv), iou_thr);
        r.tp += m.matches.len() as u64;
        r.fp += m.false_positives.len() as u64;
        r.fn_ += m.false_negatives.len() as u64;
        r.iou_sum += m.matches.iter().map(|x| x.2).sum::<f64>();
        r.gt_total += gv.len() as u64;
        r.frames += 1;
    }
    r.finalize();
    r
}

/// CLEAR-MOT accumulation with identity continuity.
pub fn evaluate_tracking(gt: &GroundTruth, hyp: &[TrackedBox], iou_thr: f64) -> EvalReport {
    let g = gt_frames(gt);
    let h = hyp_frames(hyp.iter().map(|t| (t.frame, t.label, t.bbox)));
    let empty = Vec::new();
    let mut r = EvalReport::default();
    let mut last: HashMap<u32, Label> = HashMap::new();
    let mut present: BTreeMap<u32, u64> = BTreeMap::new();
    let mut covered: BTreeMap<u32, u64> = BTreeMap::new();

    for (f, gv) in &g {
        let hv = h.get(f).unwrap_or(&empty);
        let gb = boxes(gv);
        let hb = boxes(hv);
        let mut gm = vec![None; gv.len()];
        let mut hm = vec![false; hv.len()];

        // keep last frame's correspondences while they still overlap
        for (gi, (gid, gbox)) in gv.iter().enumerate() {
            *present.entry(*gid).or_default() += 1;
            if let Some(&l) = last.get(gid) {
                let best = hv
                    .iter()
                    .enumerate()
                    .filter(|(hi, (hl, _))| *hl == l && !hm[*hi])
                    .map(|(hi, (_, hbx))| (hi, iou(gbox, hbx)))
                    .filter(|(_, v)| *v >= iou_thr)
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((hi, _)) = best {
                    gm[gi] = Some(hi);
                    hm[hi] = true;
                }
            }
        }
        let gi: Vec<usize> = (0..gv.len()).filter(|&i| gm[i].is_none()).collect();
        let hi: Vec<usize> = (0..hv.len()).filter(|&i| !hm[i]).collect();
        let a = solve(&iou_costs(&gb, &hb, &gi, &hi, iou_thr));
        for &(r_, c) in &a.pairs {
            gm[gi[r_]] = Some(hi[c]);
            hm[hi[c]] = true;
        }

        for (g_idx, m) in gm.iter().enumerate() {
            let gid = gv[g_idx].0;
            match m {
                Some(h_idx) => {
                    let l = hv[*h_idx].0;
                    if let Some(prev) = last.insert(gid, l) {
                        if prev != l {
                            r.ids += 1;
                        }
                    }
                    r.tp += 1;
                    r.iou_sum += iou(&gb[g_idx], &hb[*h_idx]);
                    *covered.entry(gid).or_default() += 1;
                }
                None => r.fn_ += 1,
            }
        }
        r.fp += hm.iter().filter(|x| !**x).count() as u64;
        r.gt_total += gv.len() as u64;
        r.frames += 1;
    }

    r.gt_tracks = present.len() as u64;
    for (gid, n) in &present {
        let c = *covered.get(gid).unwrap_or(&0) as f64 / *n as f64;
        if c >= 0.8 {
            r.mostly_tracked += 1;
        } else if c < 0.2 {
            r.mostly_lost += 1;
        }
    }
    let id = evaluate_identity(gt, hyp, iou_thr);
    r.idtp = id.idtp;
    r.idfp = id.idfp;
    r.idfn = id.idfn;
    r.finalize();
    r
}

/// Identity metrics from a global one-to-one truth-to-hypothesis matching
/// that maximizes the number of co-occurring frames.
pub fn evaluate_identity(gt: &GroundTruth, hyp: &[TrackedBox], iou_thr: f64) -> EvalReport {
    let g = gt_frames(gt);
    let h = hyp_frames(hyp.iter().map(|t| (t.frame, t.label, t.bbox)));
    let mut gids: BTreeSet<u32> = BTreeSet::new();
    let mut hids: BTreeSet<Label> = BTreeSet::new();
    let mut co: BTreeMap<(u32, Label), u64> = BTreeMap::new();
    let (mut n_gt, mut n_hyp) = (0u64, 0u64);
    for (f, gv) in &g {
        n_gt += gv.len() as u64;
        gids.extend(gv.iter().map(|x| x.0));
        let Some(hv) = h.get(f) else { continue };
        n_hyp += hv.len() as u64;
        hids.extend(hv.iter().map(|x| x.0));
        for (gid, gb) in gv {
            for (hl, hb) in hv {
                if iou(gb, hb) >= iou_thr {
                    *co.entry((*gid, *hl)).or_default() += 1;
                }
            }
        }
    }
    let gv: Vec<u32> = gids.into_iter().collect();
    let hv: Vec<Label> = hids.into_iter().collect();
    let maxc = co.values().copied().max().unwrap_or(0) as f64;
    let mut idtp = 0;
    if !gv.is_empty() && !hv.is_empty() {
        let c = CostMatrix::from_fn(gv.len(), hv.len(), |i, j| {
            maxc - *co.get(&(gv[i], hv[j])).unwrap_or(&0) as f64
        })
        .expect("co-occurrence costs are finite and non-negative");
        idtp = solve(&c)
            .pairs
            .iter()
            .map(|&(i, j)| *co.get(&(gv[i], hv[j])).unwrap_or(&0))
            .sum();
    }
    let mut r = EvalReport {
        idtp,
        idfp: n_hyp - idtp,
        idfn: n_gt - idtp,
        ..Default::default()
    };
    r.finalize();
    r
}

/// Map each hypothesis label to the ground-truth id it overlaps (IoU at
/// least `iou_thr`) in the most frames. Ties go to the smaller id.
pub fn majority_map(gt: &GroundTruth, hyp: &[TrackedBox], iou_thr: f64) -> BTreeMap<Label, u32> {
    let mut by_frame: BTreeMap<FrameIdx, Vec<&GtBox>> = BTreeMap::new();
    for b in &gt.boxes {
        by_frame.entry(b.frame).or_default().push(b);
    }
    let mut votes: BTreeMap<Label, BTreeMap<u32, u64>> = BTreeMap::new();
    for t in hyp {
        let Some(gs) = by_frame.get(&t.frame) else { continue };
        let best = gs
            .iter()
            .map(|g| (g.id, iou(&g.bbox, &t.bbox)))
            .filter(|(_, v)| *v >= iou_thr)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((id, _)) = best {
            *votes.entry(t.label).or_default().entry(id).or_default() += 1;
        }
    }
    votes
        .into_iter()
        .filter_map(|(l, v)| {
            v.into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(id, _)| (l, id))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64) -> BBox {
        BBox::new(x, y, 10.0, 10.0).unwrap()
    }

    fn gtb(frame: FrameIdx, id: u32, x: f64) -> GtBox {
        GtBox {
            frame,
            camera: 0,
            cls: ObjectClass::Person,
            id,
            bbox: b(x, 0.0),
        }
    }

    fn hb(frame: FrameIdx, label: Label, x: f64) -> TrackedBox {
        TrackedBox {
            frame,
            camera: 0,
            cls: ObjectClass::Person,
            label,
            bbox: b(x, 0.0),
        }
    }

    #[test]
    fn match_frame_cases() {
        let g = [b(0.0, 0.0), b(50.0, 0.0)];
        let m = match_frame(&g, &g, 0.4);
        assert_eq!(m.matches.len(), 2);
        assert!(m.false_positives.is_empty() && m.false_negatives.is_empty());
        let m = match_frame(&g[..1], &[], 0.4);
        assert_eq!(m.false_negatives, vec![0]);
        let g3 = [b(0.0, 0.0), b(50.0, 0.0), b(100.0, 0.0)];
        let h3 = [b(1.0, 0.0), b(51.0, 0.0), b(108.0, 0.0)];
        let m = match_frame(&g3, &h3, 0.4);
        assert_eq!(m.matches.len(), 2);
        assert_eq!(m.false_positives, vec![2]);
        assert_eq!(m.false_negatives, vec![2]);
    }

    #[test]
    fn published_detection_counts() {
        let r = EvalReport::from_counts(285, 10, 44, 0);
        assert!((100.0 * r.recall - 86.6).abs() <= 0.1);
        assert!((100.0 * r.precision - 96.6).abs() <= 0.1);
        assert!((100.0 * r.moda - 83.6).abs() <= 0.1);
        let r = EvalReport::from_counts(149, 16, 57, 0);
        assert!((100.0 * r.recall - 72.3).abs() <= 0.1);
        assert!((100.0 * r.precision - 90.3).abs() <= 0.1);
        assert!((100.0 * r.moda - 64.6).abs() <= 0.1);
    }

    #[test]
    fn perfect_tracking() {
        let gt = GroundTruth::from_boxes((0..10).flat_map(|f| [gtb(f, 1, 0.0), gtb(f, 2, 50.0)]).collect());
        let hyp: Vec<_> = (0..10).flat_map(|f| [hb(f, 7, 0.0), hb(f, 8, 50.0)]).collect();
        let r = evaluate_tracking(&gt, &hyp, 0.4);
        assert_eq!((r.tp, r.fp, r.fn_, r.ids), (20, 0, 0, 0));
        assert_eq!(r.mota, 1.0);
        assert_eq!(r.mt, 1.0);
        assert_eq!(r.idf1, 1.0);
        assert!((r.motp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn label_swap_counts_two_switches() {
        let gt = GroundTruth::from_boxes((0..10).flat_map(|f| [gtb(f, 1, 0.0), gtb(f, 2, 50.0)]).collect());
        let hyp: Vec<_> = (0..10)
            .flat_map(|f| {
                if f < 5 {
                    [hb(f, 7, 0.0), hb(f, 8, 50.0)]
                } else {
                    [hb(f, 8, 0.0), hb(f, 7, 50.0)]
                }
            })
            .collect();
        let r = evaluate_tracking(&gt, &hyp, 0.4);
        assert_eq!(r.ids, 2);
        assert_eq!((r.tp, r.fp, r.fn_), (20, 0, 0));
        assert!((r.mota - 0.9).abs() < 1e-12);
        assert_eq!(r.idtp, 10);
        assert!((r.idf1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn half_covered_identity() {
        let gt = GroundTruth::from_boxes((0..10).map(|f| gtb(f, 1, 0.0)).collect());
        let hyp: Vec<_> = (0..5).map(|f| hb(f, 3, 0.0)).collect();
        let r = evaluate_identity(&gt, &hyp, 0.4);
        assert!((r.idr - 0.5).abs() < 1e-12);
        assert!((r.idp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn majority_labels() {
        let gt = GroundTruth::from_boxes((0..6).map(|f| gtb(f, 4, 0.0)).collect());
        let mut hyp: Vec<_> = (0..6).map(|f| hb(f, 9, 0.0)).collect();
        hyp.push(hb(0, 10, 300.0));
        let m = majority_map(&gt, &hyp, 0.4);
        assert_eq!(m.get(&9), Some(&4));
        assert_eq!(m.get(&10), None);
    }
}
