//! Planar geometry: points, boxes, polygons, homographies, and the point-set
//! distances used by the association stages.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Axis-aligned box in center format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    /// Build from a top-left corner and size (the MOT file convention).
    pub fn from_corner(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::param("bbox", "non-finite center"));
        }
        if !(self.w > 0.0 && self.w.is_finite()) || !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::param(
                "bbox",
                format!("size must be positive, got {}x{}", self.w, self.h),
            ));
        }
        Ok(())
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.cx, self.cy)
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }
    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }
    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }
    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn as_vec4(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// The four corners, counter-clockwise in a y-up frame.
    pub fn corners(&self) -> Polygon {
        let (l, t, r, b) = (self.left(), self.top(), self.right(), self.bottom());
        Polygon {
            vertices: vec![
                Point2::new(l, t),
                Point2::new(r, t),
                Point2::new(r, b),
                Point2::new(l, b),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let p = Polygon { vertices };
        if p.vertices.len() < 3 {
            return Err(Error::param("polygon", "needs at least 3 vertices"));
        }
        if p.area() <= 0.0 {
            return Err(Error::DegeneratePolygon);
        }
        Ok(p)
    }

    /// Rectangle of size `w`x`h` centered on `center`, rotated by `angle`.
    pub fn oriented_rect(center: Point2, w: f64, h: f64, angle: f64) -> Polygon {
        let (hw, hh) = (w / 2.0, h / 2.0);
        let vertices = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .into_iter()
            .map(|(dx, dy)| rotate_point(center + Point2::new(dx, dy), angle, center))
            .collect();
        Polygon { vertices }
    }

    /// Absolute shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut twice = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            twice += a.x * b.y - b.x * a.y;
        }
        (twice / 2.0).abs()
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        self.map(|p| Point2::new(p.x + dx, p.y + dy))
    }

    pub fn rotated(&self, theta: f64, center: Point2) -> Polygon {
        let (s, c) = theta.sin_cos();
        self.map(|p| rotate_with(p, s, c, center))
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point2::new(sx / n, sy / n)
    }
}

/// Region of interest, center format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub rx: f64,
    pub ry: f64,
    pub rw: f64,
    pub rh: f64,
}

impl Roi {
    pub fn new(rx: f64, ry: f64, rw: f64, rh: f64) -> Result<Self> {
        if !(rw > 0.0 && rh > 0.0) {
            return Err(Error::param("roi", format!("size must be positive, got {rw}x{rh}")));
        }
        if !(rx.is_finite() && ry.is_finite()) {
            return Err(Error::param("roi", "non-finite center"));
        }
        Ok(Self { rx, ry, rw, rh })
    }

    /// The whole `width`x`height` image.
    pub fn full_image(width: f64, height: f64) -> Result<Self> {
        Self::new(width / 2.0, height / 2.0, width, height)
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.rx, self.ry)
    }

    /// Offset from rotated-canvas coordinates (origin at the canvas corner,
    /// ROI center at the canvas center) back to image coordinates.
    pub fn canvas_offset(&self) -> Point2 {
        Point2::new(self.rx - self.rw / 2.0, self.ry - self.rh / 2.0)
    }

    /// Map an image point into the canvas of the ROI rotated by `theta`.
    pub fn to_canvas(&self, p: Point2, theta: f64) -> Point2 {
        rotate_point(p, theta, self.center()) - self.canvas_offset()
    }

    /// Inverse of [`Roi::to_canvas`].
    pub fn from_canvas(&self, q: Point2, theta: f64) -> Point2 {
        rotate_point(q + self.canvas_offset(), -theta, self.center())
    }

    pub fn contains(&self, p: Point2) -> bool {
        (p.x - self.rx).abs() <= self.rw / 2.0 && (p.y - self.ry).abs() <= self.rh / 2.0
    }
}

/// Projective map between two image planes, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography {
    m: [[f64; 3]; 3],
}

const SINGULAR_DET: f64 = 1e-12;
const INFINITY_W: f64 = 1e-12;

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Normalizes so that `m[2][2] == 1` (when non-zero) and rejects singular
    /// or non-finite matrices.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("homography", "non-finite entry"));
        }
        let mut m = m;
        let s = m[2][2];
        if s != 0.0 {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
        }
        let det = Self::mat(&m).determinant();
        if det.abs() <= SINGULAR_DET || !det.is_finite() {
            return Err(Error::SingularHomography { det });
        }
        Ok(Self { m })
    }

    /// Direct linear transform from exactly four point correspondences.
    pub fn from_correspondences(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Self> {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for i in 0..4 {
            let (x, y) = (src[i].x, src[i].y);
            let (u, v) = (dst[i].x, dst[i].y);
            let r = 2 * i;
            a.row_mut(r)
                .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
            a.row_mut(r + 1)
                .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a.lu().solve(&b).ok_or(Error::SingularHomography { det: 0.0 })?;
        Self::new([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    fn mat(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
        Matrix3::from_row_slice(&[
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ])
    }

    pub fn determinant(&self) -> f64 {
        Self::mat(&self.m).determinant()
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = Self::mat(&self.m).try_inverse().ok_or(Error::SingularHomography {
            det: self.determinant(),
        })?;
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = inv[(r, c)];
            }
        }
        Self::new(out)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        let p = Self::mat(&self.m) * Self::mat(&other.m);
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = p[(r, c)];
            }
        }
        Self::new(out)
    }

    pub fn project(&self, p: Point2) -> Result<Point2> {
        project_point(self, p)
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = Error;
    fn try_from(m: [[f64; 3]; 3]) -> Result<Self> {
        Homography::new(m)
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.m
    }
}

#[inline]
fn rotate_with(p: Point2, s: f64, c: f64, center: Point2) -> Point2 {
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    Point2::new(center.x + c * dx - s * dy, center.y + s * dx + c * dy)
}

/// Rotate `p` by `theta` radians about `center`.
pub fn rotate_point(p: Point2, theta: f64, center: Point2) -> Point2 {
    let (s, c) = theta.sin_cos();
    rotate_with(p, s, c, center)
}

/// Tightest axis-aligned box around the polygon's vertices.
pub fn polygon_bbox(poly: &Polygon) -> Result<BBox> {
    let mut it = poly.vertices.iter();
    let first = it.next().ok_or(Error::EmptyInput("polygon vertices"))?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for p in it {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let (w, h) = (x1 - x0, y1 - y0);
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::DegeneratePolygon);
    }
    Ok(BBox {
        cx: (x0 + x1) / 2.0,
        cy: (y0 + y1) / 2.0,
        w,
        h,
    })
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn project_point(h: &Homography, p: Point2) -> Result<Point2> {
    let v = Homography::mat(&h.m) * Vector3::new(p.x, p.y, 1.0);
    if v.z.abs() < INFINITY_W {
        return Err(Error::PointAtInfinity { x: p.x, y: p.y });
    }
    Ok(Point2::new(v.x / v.z, v.y / v.z))
}

/// Directed distance sup_{a∈A} inf_{b∈B} |a − b|.
fn directed_hausdorff(a: &[Point2], b: &[Point2]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| (p.x - q.x).powi(2) + (p.y - q.y).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Symmetric Hausdorff distance between two non-empty point sets.
pub fn hausdorff(a: &[Point2], b: &[Point2]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("hausdorff point set"));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}
