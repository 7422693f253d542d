//! Raw touches from every top-view display to session events.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::catalog::Catalog;
use crate::recognition::{TangibleEvent, TangibleEventKind, Tracker, TrackerConfig};
use crate::session::Event;
use crate::Point;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("no calibration for display {0}")]
pub struct UnknownDisplay(pub String);

/// One tracker per calibrated display. A tangible belongs to the display
/// that last reported it, so sliding it from one display onto the next is a
/// move rather than a removal.
#[derive(Clone, Debug)]
pub struct TouchRouter {
    environment_id: String,
    trackers: BTreeMap<String, Tracker<f64>>,
    owner: BTreeMap<String, String>,
}

impl TouchRouter {
    pub fn new(catalog: &Catalog, environment_id: &str) -> Self {
        let env = catalog
            .environment(environment_id)
            .unwrap_or_else(|| catalog.default_environment());
        let registry = catalog.registry().specs().to_vec();
        let trackers = env
            .calibrations
            .iter()
            .map(|cal| {
                let tracker = Tracker::new(registry.clone(), cal.clone(), TrackerConfig::default());
                (cal.display_id().to_owned(), tracker)
            })
            .collect();
        Self {
            environment_id: env.id.clone(),
            trackers,
            owner: BTreeMap::new(),
        }
    }

    pub fn environment_id(&self) -> &str {
        &self.environment_id
    }

    pub fn touches(&mut self, display_id: &str, t_ms: u64, points: &[Point]) -> Result<Vec<Event>, UnknownDisplay> {
        let tracker = self
            .trackers
            .get_mut(display_id)
            .ok_or_else(|| UnknownDisplay(display_id.to_owned()))?;
        let raw = tracker.observe_touches(t_ms, points);
        Ok(self.route(display_id.to_owned(), raw))
    }

    /// Removals due by `now_ms` on every display.
    pub fn expire(&mut self, now_ms: u64) -> Vec<Event> {
        let mut out = Vec::new();
        let ids: Vec<String> = self.trackers.keys().cloned().collect();
        for id in ids {
            let raw = self.trackers.get_mut(&id).expect("listed").expire(now_ms);
            out.extend(self.route(id, raw));
        }
        out
    }

    fn route(&mut self, display: String, raw: Vec<TangibleEvent<f64>>) -> Vec<Event> {
        let mut out = Vec::new();
        for ev in raw {
            let owned_here = self.owner.get(&ev.tangible_id) == Some(&display);
            match ev.kind {
                TangibleEventKind::Placed | TangibleEventKind::Moved => {
                    let placed = self.owner.contains_key(&ev.tangible_id);
                    self.owner.insert(ev.tangible_id.clone(), display.clone());
                    out.push(if placed {
                        Event::TangibleMoved {
                            tangible_id: ev.tangible_id,
                            pose: ev.pose,
                        }
                    } else {
                        Event::TangiblePlaced {
                            tangible_id: ev.tangible_id,
                            pose: ev.pose,
                        }
                    });
                }
                TangibleEventKind::Removed if owned_here => {
                    self.owner.remove(&ev.tangible_id);
                    out.push(Event::TangibleRemoved {
                        tangible_id: ev.tangible_id,
                        pose: Some(ev.pose),
                    });
                }
                TangibleEventKind::Removed => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::pattern::PatternLibrary;
    use crate::recognition::synthesize_triad;
    use crate::scene::load_environment;
    use crate::tangible::DisplayCalibration;

    fn catalog() -> Catalog {
        let env = load_environment(
            r#"
id = "e"
name = "E"
world_size = [20.0, 10.0]

[[calibrations]]
display_id = "a"
transform = [0.01, 0.0, 0.0, 0.0, 0.01, 0.0]
pixel_pitch_mm = 0.25

[[calibrations]]
display_id = "b"
transform = [0.01, 0.0, 10.0, 0.0, 0.01, 0.0]
pixel_pitch_mm = 0.25

[[tangibles]]
id = "car"
role = "vehicle"
pins = [[0.0, 0.0], [30.0, 0.0], [0.0, 40.0]]
"#,
        )
        .unwrap();
        Catalog::new(vec![env], PatternLibrary::new()).unwrap()
    }

    fn pixels(cat: &Catalog, display: &str, at_mm: (f64, f64)) -> Vec<Point> {
        let env = cat.default_environment();
        let cal: &DisplayCalibration<f64> = env.calibration(display).unwrap();
        let spec = cat.tangible("car").unwrap();
        synthesize_triad(spec, Point2::new(at_mm.0, at_mm.1), 0.0, cal, 0)
            .points
            .to_vec()
    }

    #[test]
    fn handover_between_displays_is_a_move() {
        let cat = catalog();
        let mut r = TouchRouter::new(&cat, "e");
        let ev = r.touches("a", 0, &pixels(&cat, "a", (100.0, 100.0))).unwrap();
        assert!(matches!(ev.as_slice(), [Event::TangiblePlaced { .. }]));
        let ev = r.touches("b", 50, &pixels(&cat, "b", (10.0, 100.0))).unwrap();
        assert!(matches!(ev.as_slice(), [Event::TangibleMoved { .. }]));
        // display a's stale track expires without a removal
        assert!(r.expire(240).is_empty());
        assert!(matches!(r.expire(251).as_slice(), [Event::TangibleRemoved { .. }]));
    }

    #[test]
    fn removal_after_timeout() {
        let cat = catalog();
        let mut r = TouchRouter::new(&cat, "e");
        r.touches("a", 0, &pixels(&cat, "a", (100.0, 100.0))).unwrap();
        assert!(r.expire(200).is_empty());
        assert!(matches!(r.expire(201).as_slice(), [Event::TangibleRemoved { .. }]));
        assert!(r.touches("zz", 0, &[]).is_err());
    }
}
