//! Touch-triad classification, rigid pose recovery and per-display tracking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{fit_rigid, heading_delta, heading_of, Point2};
use crate::scalar::Scalar;
use crate::tangible::{sorted_opposite_edges, DisplayCalibration, TangibleSpec};

pub const DEFAULT_MAX_RESIDUAL_MM: f64 = 4.0;
pub const DEFAULT_REMOVAL_MS: u64 = 200;
pub const DEFAULT_MOVE_MM: f64 = 1.0;
pub const DEFAULT_MOVE_DEG: f64 = 1.0;

/// Upper bound on simultaneous touches considered by [`group_touches`].
pub const MAX_GROUPED_TOUCHES: usize = 12;

/// Three simultaneous touch points on one display, in device pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TouchTriad<T> {
    pub display_id: String,
    pub points: [Point2<T>; 3],
    pub timestamp_ms: u64,
}

/// Pose in the world frame; `residual_mm` is the RMS fit error on the device.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Pose2D<T> {
    pub x_m: T,
    pub y_m: T,
    pub heading_deg: T,
    #[serde(default = "zero")]
    pub residual_mm: T,
}

fn zero<T: Scalar>() -> T {
    T::zero()
}

impl<T: Scalar> Pose2D<T> {
    pub fn new(x_m: T, y_m: T, heading_deg: T) -> Self {
        Self {
            x_m,
            y_m,
            heading_deg: crate::geom::normalize_degrees(heading_deg),
            residual_mm: T::zero(),
        }
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x_m, self.y_m)
    }
}

/// Pose in device millimetres, before mapping into the world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DevicePose<T> {
    pub position_mm: Point2<T>,
    pub heading_deg: T,
    pub residual_mm: T,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RecognitionError {
    #[error("no_match: no registered tangible accepts distances {0:?}")]
    NoMatch([f64; 3]),
    #[error("ambiguous: tangibles {0:?} all accept the triad")]
    Ambiguous(Vec<String>),
    #[error("no_calibration for display {0}")]
    NoCalibration(String),
    #[error("triad points are not distinct")]
    DuplicatePoints,
    #[error("degenerate geometry")]
    Degenerate,
    #[error("residual {residual_mm:.3} mm above threshold {limit_mm:.3} mm")]
    ResidualTooHigh { residual_mm: f64, limit_mm: f64 },
}

/// Observed touches re-ordered to match the pins of one tangible.
#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence<T> {
    pub tangible_id: String,
    /// `pin_to_touch[pin]` is the index into the triad's points.
    pub pin_to_touch: [usize; 3],
    /// Observed positions in device millimetres, in pin order.
    pub observed_mm: [Point2<T>; 3],
}

/// Matches a triad against the registry by its sorted distance signature.
pub fn classify<T: Scalar>(
    triad: &TouchTriad<T>,
    registry: &[TangibleSpec<T>],
    cal: &DisplayCalibration<T>,
) -> Result<Correspondence<T>, RecognitionError> {
    if cal.display_id() != triad.display_id {
        return Err(RecognitionError::NoCalibration(triad.display_id.clone()));
    }
    let pts = triad.points;
    if pts[0] == pts[1] || pts[1] == pts[2] || pts[0] == pts[2] {
        return Err(RecognitionError::DuplicatePoints);
    }
    let mm = pts.map(|p| cal.px_to_mm(p));
    let (distances, opposite) = sorted_opposite_edges(&mm);
    let accepted: Vec<&TangibleSpec<T>> = registry.iter().filter(|s| s.accepts(&distances)).collect();
    match accepted.as_slice() {
        [] => Err(RecognitionError::NoMatch(distances.map(Scalar::as_f64))),
        [spec] => {
            let mut pin_to_touch = [0usize; 3];
            for (slot, &pin) in spec.opposite().iter().enumerate() {
                pin_to_touch[pin] = opposite[slot];
            }
            Ok(Correspondence {
                tangible_id: spec.id().to_owned(),
                pin_to_touch,
                observed_mm: pin_to_touch.map(|i| mm[i]),
            })
        }
        many => Err(RecognitionError::Ambiguous(
            many.iter().map(|s| s.id().to_owned()).collect(),
        )),
    }
}

/// Least-squares rigid fit of the pins onto the observed touches, in device
/// millimetres.
pub fn fit_device<T: Scalar>(
    corr: &Correspondence<T>,
    spec: &TangibleSpec<T>,
) -> Result<DevicePose<T>, RecognitionError> {
    let fit = fit_rigid(spec.pins(), &corr.observed_mm).ok_or(RecognitionError::Degenerate)?;
    let forward = Point2::new(T::one(), T::zero()).rotate(fit.transform.rotation);
    Ok(DevicePose {
        position_mm: fit.transform.translation,
        heading_deg: heading_of(forward),
        residual_mm: fit.rms,
    })
}

/// Maps a device-frame pose into the world through the calibration.
pub fn device_to_world<T: Scalar>(device: &DevicePose<T>, cal: &DisplayCalibration<T>) -> Pose2D<T> {
    let origin = cal.px_to_world(cal.mm_to_px(device.position_mm));
    let rad = device.heading_deg.to_radians();
    let dir = cal
        .transform()
        .apply_linear(Point2::new(rad.cos(), rad.sin()));
    Pose2D {
        x_m: origin.x,
        y_m: origin.y,
        heading_deg: heading_of(dir),
        residual_mm: device.residual_mm,
    }
}

/// Recovers the world pose of a classified tangible. Poses whose residual
/// exceeds `max_residual_mm` are rejected as spurious.
pub fn solve_pose<T: Scalar>(
    corr: &Correspondence<T>,
    spec: &TangibleSpec<T>,
    cal: &DisplayCalibration<T>,
    max_residual_mm: T,
) -> Result<Pose2D<T>, RecognitionError> {
    let device = fit_device(corr, spec)?;
    check_residual(&device, max_residual_mm)?;
    Ok(device_to_world(&device, cal))
}

fn check_residual<T: Scalar>(device: &DevicePose<T>, limit: T) -> Result<(), RecognitionError> {
    if device.residual_mm > limit || !device.residual_mm.is_finite() {
        return Err(RecognitionError::ResidualTooHigh {
            residual_mm: device.residual_mm.as_f64(),
            limit_mm: limit.as_f64(),
        });
    }
    Ok(())
}

/// Places the pins of `spec` at a device-frame pose and returns the touch
/// pixels a display would report. Used by virtual tangibles and tests.
pub fn synthesize_triad<T: Scalar>(
    spec: &TangibleSpec<T>,
    position_mm: Point2<T>,
    heading_deg: T,
    cal: &DisplayCalibration<T>,
    timestamp_ms: u64,
) -> TouchTriad<T> {
    let rot = heading_deg.to_radians();
    TouchTriad {
        display_id: cal.display_id().to_owned(),
        points: spec
            .pins()
            .map(|p| cal.mm_to_px(p.rotate(rot) + position_mm)),
        timestamp_ms,
    }
}

/// Splits loose touch points into triads by greedily taking the
/// smallest-perimeter triple that classifies, until none remain.
pub fn group_touches<T: Scalar>(
    display_id: &str,
    points: &[Point2<T>],
    timestamp_ms: u64,
    registry: &[TangibleSpec<T>],
    cal: &DisplayCalibration<T>,
) -> Vec<TouchTriad<T>> {
    let mut remaining: Vec<Point2<T>> = points.iter().copied().take(MAX_GROUPED_TOUCHES).collect();
    if points.len() > MAX_GROUPED_TOUCHES {
        log::warn!(
            "display {display_id}: {} touches, only the first {MAX_GROUPED_TOUCHES} are grouped",
            points.len()
        );
    }
    let mut triads = Vec::new();
    loop {
        let n = remaining.len();
        if n < 3 {
            break;
        }
        let mut candidates = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, c) = (remaining[i], remaining[j], remaining[k]);
                    let perimeter = a.distance(b) + b.distance(c) + a.distance(c);
                    candidates.push((perimeter, [i, j, k]));
                }
            }
        }
        candidates.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
        let found = candidates.into_iter().find_map(|(_, idx)| {
            let triad = TouchTriad {
                display_id: display_id.to_owned(),
                points: idx.map(|i| remaining[i]),
                timestamp_ms,
            };
            classify(&triad, registry, cal).ok().map(|_| (idx, triad))
        });
        match found {
            Some((idx, triad)) => {
                for &i in idx.iter().rev() {
                    remaining.remove(i);
                }
                triads.push(triad);
            }
            None => break,
        }
    }
    triads
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangibleEventKind {
    Placed,
    Moved,
    Removed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangibleEvent<T> {
    pub kind: TangibleEventKind,
    pub tangible_id: String,
    pub pose: Pose2D<T>,
    pub t_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackerConfig<T> {
    /// A tangible unseen for longer than this is reported removed.
    pub removal_ms: u64,
    /// Device-frame displacement that triggers a move event.
    pub move_mm: T,
    pub move_deg: T,
    pub max_residual_mm: T,
}

impl<T: Scalar> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            removal_ms: DEFAULT_REMOVAL_MS,
            move_mm: T::lit(DEFAULT_MOVE_MM),
            move_deg: T::lit(DEFAULT_MOVE_DEG),
            max_residual_mm: T::lit(DEFAULT_MAX_RESIDUAL_MM),
        }
    }
}

#[derive(Clone, Debug)]
struct Track<T> {
    emitted_device: DevicePose<T>,
    emitted_pose: Pose2D<T>,
    last_seen_ms: u64,
}

/// Turns a time-ordered stream of triads from one display into
/// placed/moved/removed events.
#[derive(Clone, Debug)]
pub struct Tracker<T> {
    registry: Vec<TangibleSpec<T>>,
    calibration: DisplayCalibration<T>,
    config: TrackerConfig<T>,
    live: BTreeMap<String, Track<T>>,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(
        registry: Vec<TangibleSpec<T>>,
        calibration: DisplayCalibration<T>,
        config: TrackerConfig<T>,
    ) -> Self {
        Self {
            registry,
            calibration,
            config,
            live: BTreeMap::new(),
        }
    }

    pub fn display_id(&self) -> &str {
        self.calibration.display_id()
    }

    pub fn is_live(&self, tangible_id: &str) -> bool {
        self.live.contains_key(tangible_id)
    }

    /// Emits removals for tangibles not seen within the debounce window.
    pub fn expire(&mut self, now_ms: u64) -> Vec<TangibleEvent<T>> {
        let removal = self.config.removal_ms;
        let stale: Vec<String> = self
            .live
            .iter()
            .filter(|(_, t)| now_ms.saturating_sub(t.last_seen_ms) > removal)
            .map(|(id, _)| id.clone())
            .collect();
        stale
            .into_iter()
            .map(|id| {
                let track = self.live.remove(&id).expect("listed above");
                TangibleEvent {
                    kind: TangibleEventKind::Removed,
                    tangible_id: id,
                    pose: track.emitted_pose,
                    t_ms: now_ms,
                }
            })
            .collect()
    }

    /// Feeds one triad. Rejected triads produce no event.
    pub fn observe(&mut self, triad: &TouchTriad<T>) -> Vec<TangibleEvent<T>> {
        let now = triad.timestamp_ms;
        let mut events = self.expire(now);
        match self.recognize(triad) {
            Ok((id, device, pose)) => {
                if let Some(ev) = self.update(id, device, pose, now) {
                    events.push(ev);
                }
            }
            Err(err) => log::debug!("display {}: triad rejected: {err}", self.display_id()),
        }
        events
    }

    /// Feeds a set of simultaneous touches, grouping them into triads first.
    pub fn observe_touches(&mut self, t_ms: u64, points: &[Point2<T>]) -> Vec<TangibleEvent<T>> {
        let triads = group_touches(
            self.calibration.display_id(),
            points,
            t_ms,
            &self.registry,
            &self.calibration,
        );
        let mut events = self.expire(t_ms);
        for triad in &triads {
            events.extend(self.observe(triad));
        }
        events
    }

    fn recognize(
        &self,
        triad: &TouchTriad<T>,
    ) -> Result<(String, DevicePose<T>, Pose2D<T>), RecognitionError> {
        let corr = classify(triad, &self.registry, &self.calibration)?;
        let spec = self
            .registry
            .iter()
            .find(|s| s.id() == corr.tangible_id)
            .expect("classified against this registry");
        let device = fit_device(&corr, spec)?;
        check_residual(&device, self.config.max_residual_mm)?;
        let pose = device_to_world(&device, &self.calibration);
        Ok((corr.tangible_id, device, pose))
    }

    fn update(
        &mut self,
        id: String,
        device: DevicePose<T>,
        pose: Pose2D<T>,
        now: u64,
    ) -> Option<TangibleEvent<T>> {
        let config = self.config;
        match self.live.get_mut(&id) {
            None => {
                self.live.insert(
                    id.clone(),
                    Track {
                        emitted_device: device,
                        emitted_pose: pose,
                        last_seen_ms: now,
                    },
                );
                Some(TangibleEvent {
                    kind: TangibleEventKind::Placed,
                    tangible_id: id,
                    pose,
                    t_ms: now,
                })
            }
            Some(track) => {
                track.last_seen_ms = now;
                let shift = track.emitted_device.position_mm.distance(device.position_mm);
                let turn = heading_delta(track.emitted_device.heading_deg, device.heading_deg);
                if shift > config.move_mm || turn > config.move_deg {
                    track.emitted_device = device;
                    track.emitted_pose = pose;
                    Some(TangibleEvent {
                        kind: TangibleEventKind::Moved,
                        tangible_id: id,
                        pose,
                        t_ms: now,
                    })
                } else {
                    None
                }
            }
        }
    }
}
