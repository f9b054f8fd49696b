use checkpoint_core::geometry::{hausdorff, iou, polygon_bbox, project_point, rotate_point};
use checkpoint_core::{BBox, Homography, Point2, Polygon, Roi};
use proptest::prelude::*;
use std::f64::consts::PI;

fn point() -> impl Strategy<Value = Point2> {
    (-1000.0f64..1000.0, -1000.0f64..1000.0).prop_map(|(x, y)| Point2::new(x, y))
}

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0f64..500.0, 0.0f64..500.0, 1.0f64..200.0, 1.0f64..200.0)
        .prop_map(|(cx, cy, w, h)| BBox::new(cx, cy, w, h).unwrap())
}

fn points() -> impl Strategy<Value = Vec<Point2>> {
    proptest::collection::vec(point(), 1..25)
}

/// Homographies near a similarity with a mild perspective term.
fn homography() -> impl Strategy<Value = Homography> {
    (
        0.5f64..2.0,
        -PI..PI,
        -100.0f64..100.0,
        -100.0f64..100.0,
        -1e-4f64..1e-4,
        -1e-4f64..1e-4,
    )
        .prop_map(|(s, a, tx, ty, px, py)| {
            let (sn, cs) = a.sin_cos();
            Homography::new([[s * cs, -s * sn, tx], [s * sn, s * cs, ty], [px, py, 1.0]]).unwrap()
        })
}

proptest! {
    #[test]
    fn canvas_round_trip(p in point(), theta in 0.0..2.0 * PI, rw in 10.0f64..900.0, rh in 10.0f64..900.0) {
        let roi = Roi::new(640.0, 360.0, rw, rh).unwrap();
        let back = roi.from_canvas(roi.to_canvas(p, theta), theta);
        prop_assert!(back.distance(&p) < 1e-9);
    }

    #[test]
    fn rotation_preserves_distance_to_center(p in point(), c in point(), theta in -PI..PI) {
        let q = rotate_point(p, theta, c);
        prop_assert!((q.distance(&c) - p.distance(&c)).abs() < 1e-9);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bbox_of_rotated_rect_contains_its_vertices(c in point(), w in 1.0f64..100.0, h in 1.0f64..100.0, a in -PI..PI) {
        let poly = Polygon::oriented_rect(c, w, h, a);
        let b = polygon_bbox(&poly).unwrap();
        for v in &poly.vertices {
            prop_assert!(v.x >= b.left() - 1e-9 && v.x <= b.right() + 1e-9);
            prop_assert!(v.y >= b.top() - 1e-9 && v.y <= b.bottom() + 1e-9);
        }
        prop_assert!(b.area() + 1e-9 >= poly.area());
    }

    #[test]
    fn hausdorff_is_a_metric(a in points(), b in points(), c in points()) {
        let ab = hausdorff(&a, &b).unwrap();
        prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        let bc = hausdorff(&b, &c).unwrap();
        let ac = hausdorff(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn hausdorff_of_translated_copy_is_the_shift(a in points(), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let b: Vec<Point2> = a.iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect();
        let d = hausdorff(&a, &b).unwrap();
        prop_assert!(d <= dx.hypot(dy) + 1e-9);
    }

    #[test]
    fn homography_inverse_round_trip(h in homography(), x in 0.0f64..1280.0, y in 0.0f64..720.0) {
        let p = Point2::new(x, y);
        let q = project_point(&h, p).unwrap();
        let back = project_point(&h.inverse().unwrap(), q).unwrap();
        prop_assert!(back.distance(&p) < 1e-6);
    }

    #[test]
    fn homography_compose_matches_sequential_projection(g in homography(), h in homography(), x in 0.0f64..1280.0, y in 0.0f64..720.0) {
        let p = Point2::new(x, y);
        let Ok(gh) = g.compose(&h) else { return Ok(()) };
        let (Ok(direct), Ok(step)) = (project_point(&gh, p), project_point(&h, p).and_then(|q| project_point(&g, q))) else {
            return Ok(());
        };
        prop_assert!(direct.distance(&step) < 1e-6 * (1.0 + step.x.abs() + step.y.abs()));
    }

    #[test]
    fn four_point_fit_reproduces_correspondences(h in homography()) {
        let src = [
            Point2::new(0.0, 0.0),
            Point2::new(1000.0, 0.0),
            Point2::new(1000.0, 700.0),
            Point2::new(0.0, 700.0),
        ];
        let dst = src.map(|p| project_point(&h, p).unwrap());
        let fit = Homography::from_correspondences(&src, &dst).unwrap();
        for (s, d) in src.iter().zip(&dst) {
            prop_assert!(project_point(&fit, *s).unwrap().distance(d) < 1e-6);
        }
    }
}

#[test]
fn singular_matrix_is_rejected() {
    assert!(Homography::new([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).is_err());
}

#[test]
fn hausdorff_needs_points() {
    assert!(hausdorff(&[], &[Point2::new(0.0, 0.0)]).is_err());
}
