mod common;

use ehmi::geom::{Affine2, Point2};
use ehmi::recognition::{classify, solve_pose, RecognitionError, TouchTriad, DEFAULT_MAX_RESIDUAL_MM};
use ehmi::session::Event;
use ehmi::tangible::{DisplayCalibration, TangibleRegistry, TangibleRole, TangibleSpec};
use ehmi::touch::TouchRouter;
use ehmi::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Touch pixels for `pins` placed at `pos_mm` rotated by `deg`, computed
/// here rather than through the library.
fn touches(pins: &[Point; 3], pos_mm: (f64, f64), deg: f64, pitch: f64, jitter: &mut impl FnMut() -> f64) -> [Point; 3] {
    let (s, c) = deg.to_radians().sin_cos();
    pins.map(|p| {
        let x = c * p.x - s * p.y + pos_mm.0 + jitter();
        let y = s * p.x + c * p.y + pos_mm.1 + jitter();
        Point2::new(x / pitch, y / pitch)
    })
}

fn affine(m: &[f64; 6], x: f64, y: f64) -> (f64, f64) {
    (m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
}

fn wrap_deg(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    r.min(360.0 - r)
}

fn rotated_display() -> (DisplayCalibration<f64>, [f64; 6]) {
    // 30 degree rotation, 2 cm per px, offset
    let (s, c) = 30f64.to_radians().sin_cos();
    let k = 0.02;
    let m = [k * c, -k * s, 3.0, k * s, k * c, -1.0];
    (DisplayCalibration::new("d", Affine2::from(m), 0.25).unwrap(), m)
}

#[test]
fn noiseless_pose_matches_hand_computed_world_pose() {
    let cat = common::catalog();
    let (cal, m) = rotated_display();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let registry = cat.registry().specs().to_vec();
    for spec in &registry {
        for _ in 0..500 {
            let pos = (rng.random_range(0.0..400.0), rng.random_range(0.0..250.0));
            let h = rng.random_range(0.0..360.0);
            let pts = touches(spec.pins(), pos, h, 0.25, &mut || 0.0);
            let triad = TouchTriad {
                display_id: "d".into(),
                points: pts,
                timestamp_ms: 0,
            };
            let corr = classify(&triad, &registry, &cal).unwrap();
            assert_eq!(corr.tangible_id, spec.id());
            let pose = solve_pose(&corr, spec, &cal, DEFAULT_MAX_RESIDUAL_MM).unwrap();
            let (wx, wy) = affine(&m, pos.0 / 0.25, pos.1 / 0.25);
            // the display is a similarity rotated by 30 degrees
            let want_h = (h + 30.0).rem_euclid(360.0);
            assert!((pose.x_m - wx).abs() < 1e-6 && (pose.y_m - wy).abs() < 1e-6, "{pose:?} vs {wx},{wy}");
            assert!(wrap_deg(pose.heading_deg - want_h) < 1e-6, "{} vs {want_h}", pose.heading_deg);
            assert!(pose.residual_mm < 1e-9);
        }
    }
}

#[test]
fn rigid_motion_keeps_identity() {
    let cat = common::catalog();
    let registry = cat.registry().specs().to_vec();
    let cal = DisplayCalibration::identity("d");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in &registry {
        for _ in 0..200 {
            let pts = touches(
                spec.pins(),
                (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)),
                rng.random_range(-720.0..720.0),
                1.0,
                &mut || 0.0,
            );
            let triad = TouchTriad {
                display_id: "d".into(),
                points: pts,
                timestamp_ms: 0,
            };
            assert_eq!(classify(&triad, &registry, &cal).unwrap().tangible_id, spec.id());
        }
    }
}

#[test]
fn jittered_classification_at_default_tolerance() {
    // With 0.5 mm per-axis jitter, edge-length noise is ~0.7 mm, inside the
    // 3 mm band with a wide margin.
    let cat = common::catalog();
    let registry = cat.registry().specs().to_vec();
    let cal = DisplayCalibration::identity("d");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.5).unwrap();
    for spec in &registry {
        for _ in 0..1000 {
            let pos = (rng.random_range(0.0..300.0), 100.0);
            let h = rng.random_range(0.0..360.0);
            let pts = touches(spec.pins(), pos, h, 1.0, &mut || noise.sample(&mut rng));
            let triad = TouchTriad {
                display_id: "d".into(),
                points: pts,
                timestamp_ms: 0,
            };
            assert_eq!(classify(&triad, &registry, &cal).unwrap().tangible_id, spec.id());
        }
    }
}

#[test]
fn overlapping_bands_are_ambiguous() {
    let a = TangibleSpec::new(
        "a",
        TangibleRole::Vehicle,
        [Point2::new(0.0, 0.0), Point2::new(30.0, 0.0), Point2::new(0.0, 40.0)],
        3.0,
    )
    .unwrap();
    let b = TangibleSpec::new(
        "b",
        TangibleRole::Vehicle,
        [Point2::new(0.0, 0.0), Point2::new(30.0, 0.0), Point2::new(0.0, 41.0)],
        3.0,
    )
    .unwrap();
    let mut reg = TangibleRegistry::new();
    reg.register(a.clone()).unwrap();
    assert!(reg.register(b.clone()).is_err());
    reg.register_unchecked(b);
    let triad = TouchTriad {
        display_id: "d".into(),
        points: *a.pins(),
        timestamp_ms: 0,
    };
    let err = classify(&triad, reg.specs(), &DisplayCalibration::identity("d")).unwrap_err();
    assert!(matches!(err, RecognitionError::Ambiguous(ref ids) if ids.len() == 2), "{err:?}");
}

#[test]
fn two_tangibles_on_one_display_are_grouped() {
    let cat = common::catalog();
    let mut router = TouchRouter::new(&cat, "shared-space");
    let car = cat.tangible("car").unwrap();
    let view = cat.tangible("view").unwrap();
    let mut mixed: Vec<Point> = touches(car.pins(), (100.0, 80.0), 20.0, 0.25, &mut || 0.0).to_vec();
    mixed.extend(touches(view.pins(), (260.0, 150.0), 200.0, 0.25, &mut || 0.0));
    mixed.swap(1, 4);
    let events = router.touches("top-left", 0, &mixed).unwrap();
    let mut placed: Vec<&str> = events
        .iter()
        .map(|e| match e {
            Event::TangiblePlaced { tangible_id, .. } => tangible_id.as_str(),
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    placed.sort();
    assert_eq!(placed, ["car", "view"]);
}

#[test]
fn drag_emits_monotone_moves_and_hold_is_quiet() {
    let cat = common::catalog();
    let mut router = TouchRouter::new(&cat, "shared-space");
    let car = cat.tangible("car").unwrap();
    let at = |x: f64| touches(car.pins(), (x, 100.0), 0.0, 0.25, &mut || 0.0);

    let mut events = Vec::new();
    for k in 0..=50 {
        events.extend(router.touches("top-left", k * 100, &at(50.0)).unwrap());
    }
    assert_eq!(events.len(), 1, "hold still for 5 s: {events:?}");

    let mut xs = Vec::new();
    for step in 1..=10 {
        for e in router.touches("top-left", 5000 + step * 30, &at(50.0 + step as f64 * 10.0)).unwrap() {
            match e {
                Event::TangibleMoved { pose, .. } => xs.push(pose.x_m),
                other => panic!("unexpected {other:?}"),
            }
        }
    }
    assert!(!xs.is_empty() && xs.len() <= 10);
    assert!(xs.windows(2).all(|w| w[1] > w[0]));

    // a 100 ms lift is debounced
    assert!(router.expire(5300 + 100).is_empty());
    assert!(router.touches("top-left", 5400, &at(150.0)).unwrap().is_empty());
}
