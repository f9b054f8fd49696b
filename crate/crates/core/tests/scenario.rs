use checkpoint_core::fusion::angle;
use checkpoint_core::scenario::{
    default_primary, detect_objects, generate, DetectionModel, NoiseModel, ObjectInstance, ScenarioConfig,
};
use checkpoint_core::{Error, ObjectClass, Point2};
use proptest::prelude::*;

#[test]
fn per_angle_detection_frequency_follows_the_model() {
    let model = DetectionModel::default();
    let noise = NoiseModel {
        detection: model,
        spurious_rate: 0.0,
        ..NoiseModel::default()
    };
    let cam = default_primary();
    let n = 20;
    let trials = 4000;
    for heading in [0.0, 0.4, 1.2, std::f64::consts::FRAC_PI_2] {
        let o = ObjectInstance {
            id: 1,
            cls: ObjectClass::Person,
            center: Point2::new(640.0, 360.0),
            size: [56.0, 36.0],
            heading,
        };
        for i in 0..n {
            let theta = angle(i, n);
            let hits = (0..trials)
                .filter(|&f| {
                    !detect_objects(&[o], &cam, &noise, 11, f, theta, 0.5)
                        .unwrap()
                        .is_empty()
                })
                .count();
            let freq = hits as f64 / trials as f64;
            let want = model.probability(heading + theta);
            assert!(
                (freq - want).abs() <= 0.03,
                "heading {heading}, angle {i}: observed {freq:.3}, expected {want:.3}"
            );
        }
    }
}

#[test]
fn spurious_detections_leave_real_ones_untouched() {
    let cam = default_primary();
    let objects: Vec<ObjectInstance> = (0..5)
        .map(|k| ObjectInstance {
            id: k + 1,
            cls: ObjectClass::Bag,
            center: Point2::new(150.0 + 200.0 * k as f64, 300.0),
            size: [34.0, 24.0],
            heading: 0.2 * k as f64,
        })
        .collect();
    let quiet = NoiseModel {
        spurious_rate: 0.0,
        ..NoiseModel::default()
    };
    let noisy = NoiseModel {
        spurious_rate: 3.0,
        ..NoiseModel::default()
    };
    for f in 0..50 {
        let a = detect_objects(&objects, &cam, &quiet, 5, f, 0.7, 0.5).unwrap();
        let b = detect_objects(&objects, &cam, &noisy, 5, f, 0.7, 0.5).unwrap();
        assert_eq!(a[..], b[..a.len()]);
    }
}

#[test]
fn detector_noise_does_not_change_trajectories() {
    let base = ScenarioConfig::default();
    let noisy = ScenarioConfig {
        noise: NoiseModel {
            spurious_rate: 2.0,
            center_jitter: 5.0,
            ..NoiseModel::default()
        },
        ..base.clone()
    };
    let (a, b) = (generate(&base).unwrap(), generate(&noisy).unwrap());
    assert_eq!(a.objects, b.objects);
    assert_eq!(a.segments, b.segments);
    assert_eq!(a.ownership, b.ownership);
    let cam = a.config.primary.id;
    assert_eq!(a.ground_truth(cam).unwrap(), b.ground_truth(cam).unwrap());
}

#[test]
fn seeds_change_the_scene() {
    let a = generate(&ScenarioConfig {
        seed: 1,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let b = generate(&ScenarioConfig {
        seed: 2,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let a2 = generate(&ScenarioConfig {
        seed: 1,
        ..ScenarioConfig::default()
    })
    .unwrap();
    assert_eq!(a.objects, a2.objects);
    assert_ne!(a.objects, b.objects);
}

#[test]
fn speeds_above_the_bound_are_rejected() {
    let cfg = ScenarioConfig {
        walk_speed: 9.0,
        ..ScenarioConfig::default()
    };
    assert!(matches!(generate(&cfg), Err(Error::InfeasibleWaypoints { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scenes_respect_their_configuration(seed in any::<u64>(), passengers in 1usize..6, bags in 0usize..4, reentries in 0usize..3) {
        let cfg = ScenarioConfig { seed, passengers, bags, reentries, ..ScenarioConfig::default() };
        let t = generate(&cfg).unwrap();
        let persons = t.objects.iter().filter(|o| o.cls == ObjectClass::Person).count();
        prop_assert_eq!(persons, passengers);
        prop_assert_eq!(t.ownership.len(), bags);
        prop_assert_eq!(t.reentries.len(), reentries);
        for o in &t.objects {
            for w in o.samples.windows(2) {
                prop_assert!(w[0].pos.distance(&w[1].pos) <= cfg.max_speed + 1e-9);
            }
        }
        for (bag, owner) in &t.ownership {
            prop_assert!(t.objects.iter().any(|o| o.id == *bag && o.cls == ObjectClass::Bag));
            prop_assert!(t.objects.iter().any(|o| o.id == *owner && o.cls == ObjectClass::Person));
        }
    }
}
