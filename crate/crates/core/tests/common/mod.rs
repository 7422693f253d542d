#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use ehmi::catalog::Catalog;

pub mod convergence;
pub mod programs;

pub fn scenes_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

/// Both bundled environments, shared space first.
pub fn catalog() -> Arc<Catalog> {
    let dir = scenes_dir();
    let envs = [dir.join("shared_space.toml"), dir.join("street.toml")];
    Arc::new(Catalog::load(&envs, &dir.join("patterns")).expect("bundled scenes load"))
}

use ehmi::pattern::Rgb;
use ehmi::session::Event;
use ehmi::Pose;
use rand::Rng;

const FIELDS: [&str; 6] = ["crossing", "turn", "yield", "pick-up", "approach", "nowhere"];
const PATTERNS: [&str; 7] = ["sweep-left", "turn-left", "yield-pulse", "solid-cyan", "hazard-blink", "front-segment", "custom-0"];

/// A random session event. Roughly a fifth of them are rejected by the
/// state machine (unknown ids, disallowed patterns, removing absent pieces).
pub fn random_event(rng: &mut impl Rng) -> Event {
    let pick = |rng: &mut dyn rand::RngCore, xs: &[&str]| xs[rng.random_range(0..xs.len())].to_owned();
    let tangible = |rng: &mut dyn rand::RngCore| if rng.random_bool(0.7) { "car" } else { "view" }.to_owned();
    let pose = |rng: &mut dyn rand::RngCore| {
        Pose::new(rng.random_range(0.0..60.0), rng.random_range(0.0..16.875), rng.random_range(0.0..360.0))
    };
    match rng.random_range(0..100) {
        0..=29 => Event::TangibleMoved { tangible_id: tangible(rng), pose: pose(rng) },
        30..=39 => Event::TangiblePlaced { tangible_id: tangible(rng), pose: pose(rng) },
        40..=47 => Event::TangibleRemoved { tangible_id: tangible(rng), pose: None },
        48..=61 => Event::PatternAssigned { field_id: pick(rng, &FIELDS), pattern_id: pick(rng, &PATTERNS) },
        62..=75 => Event::ColorChanged {
            field_id: pick(rng, &FIELDS),
            param: pick(rng, &["c", "band", "signal", "bar", "x"]),
            rgb: Rgb::new(rng.random(), rng.random(), rng.random()),
        },
        76..=85 => Event::BrightnessChanged { value: rng.random_range(-0.1..1.1) },
        86..=92 => Event::AnonymizeToggled { flag: rng.random() },
        93..=96 => Event::EnvironmentSwitched {
            environment_id: pick(rng, &["shared-space", "street", "moon"]),
        },
        _ => Event::PatternDefined {
            source: format!(
                "pattern \"custom-{}\" {{ param color c = #FF00FF duration 800ms layer blink(c, 400ms, 0.5) }}",
                rng.random_range(0..4)
            ),
            fields: vec![pick(rng, &FIELDS[..4])],
        },
    }
}
