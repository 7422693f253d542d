//! Environment data model and config ingestion.
//!
//! An environment is one TOML file. World frame: origin at the top-left of
//! the environment, +x east, +y south, metres. See `docs/config.md` for the
//! schema.

use std::borrow::Cow;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{convex_contains, is_convex, normalize_degrees, signed_area, Point2};
use crate::tangible::{
    CalibrationError, DisplayCalibration, RegistrationError, TangibleRegistry, TangibleSpec,
};

pub const DEFAULT_LOOP_DELAY_MS: u64 = 500;

type Point = Point2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewRole {
    TopView,
    FirstPerson,
}

/// Axis-aligned rectangle in world metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.x + other.width
            && other.x < self.x + self.width
            && self.y < other.y + other.height
            && other.y < self.y + self.height
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayViewport {
    pub display_id: String,
    pub role: ViewRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_rect: Option<Rect>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Circle { center: Point, radius: f64 },
    Polygon { vertices: Vec<Point> },
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Circle { center, radius } => center.distance(p) <= *radius,
            Region::Polygon { vertices } => convex_contains(vertices, p),
        }
    }

    fn is_degenerate(&self) -> bool {
        match self {
            Region::Circle { center, radius } => {
                !(*radius > 0.0) || !radius.is_finite() || !center.is_finite()
            }
            Region::Polygon { vertices } => {
                vertices.len() < 3 || !(signed_area(vertices).abs() > 1e-12)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioField {
    pub id: String,
    pub label: String,
    /// 1-based declaration order; assigned on load.
    #[serde(skip)]
    pub ordinal: u32,
    pub region: Region,
    pub clip_id: String,
    #[serde(default)]
    pub allowed_pattern_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_pattern_id: Option<String>,
}

impl ScenarioField {
    /// The label shown to participants: the real label, or `Scene N`.
    pub fn displayed_label(&self, anonymized: bool) -> Cow<'_, str> {
        if anonymized {
            Cow::Owned(format!("Scene {}", self.ordinal))
        } else {
            Cow::Borrowed(&self.label)
        }
    }

    pub fn allows(&self, pattern_id: &str) -> bool {
        self.allowed_pattern_ids.iter().any(|p| p == pattern_id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

/// Position of the simulated vehicle along a clip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipPose {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionClip {
    pub id: String,
    pub duration_ms: u64,
    #[serde(default = "default_loop_delay")]
    pub loop_delay_ms: u64,
    pub waypoints: Vec<Waypoint>,
}

fn default_loop_delay() -> u64 {
    DEFAULT_LOOP_DELAY_MS
}

impl MotionClip {
    /// Length of one loop including the leading hold.
    pub fn cycle_ms(&self) -> u64 {
        self.loop_delay_ms + self.duration_ms
    }

    /// Linear interpolation of the waypoints at `t_ms` into the motion
    /// (clamped to the clip). Headings take the shorter arc.
    pub fn pose_at(&self, t_ms: u64) -> ClipPose {
        let first = self.waypoints[0];
        let last = *self.waypoints.last().expect("validated non-empty");
        let at = |w: Waypoint| ClipPose {
            x: w.x,
            y: w.y,
            heading_deg: w.heading_deg,
        };
        if t_ms <= first.t_ms {
            return at(first);
        }
        if t_ms >= last.t_ms {
            return at(last);
        }
        let i = self.waypoints.partition_point(|w| w.t_ms <= t_ms);
        let (a, b) = (self.waypoints[i - 1], self.waypoints[i]);
        let u = (t_ms - a.t_ms) as f64 / (b.t_ms - a.t_ms) as f64;
        let mut turn = normalize_degrees(b.heading_deg - a.heading_deg);
        if turn > 180.0 {
            turn -= 360.0;
        }
        ClipPose {
            x: a.x + (b.x - a.x) * u,
            y: a.y + (b.y - a.y) * u,
            heading_deg: normalize_degrees(a.heading_deg + turn * u),
        }
    }

    pub fn start(&self) -> ClipPose {
        self.pose_at(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub id: String,
    pub name: String,
    /// `[width_m, height_m]`.
    pub world_size: [f64; 2],
    #[serde(default)]
    pub layout: Vec<DisplayViewport>,
    #[serde(default)]
    pub tangibles: Vec<TangibleSpec<f64>>,
    #[serde(default)]
    pub calibrations: Vec<DisplayCalibration<f64>>,
    #[serde(default)]
    pub clips: Vec<MotionClip>,
    #[serde(default)]
    pub fields: Vec<ScenarioField>,
    /// Display-only toggle; never persisted.
    #[serde(skip)]
    pub anonymized: bool,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ValidationError {
    #[error("world size must be positive in both axes")]
    WorldSize,
    #[error("duplicate field id {0}")]
    DuplicateField(String),
    #[error("duplicate clip id {0}")]
    DuplicateClip(String),
    #[error("field {field}: unknown clip {clip}")]
    UnknownClip { field: String, clip: String },
    #[error("field {0}: degenerate region")]
    DegenerateRegion(String),
    #[error("field {0}: polygon is not convex")]
    NonConvexRegion(String),
    #[error("field {field}: assigned pattern {pattern} is not in allowed_pattern_ids")]
    AssignedNotAllowed { field: String, pattern: String },
    #[error("clip {0}: duration_ms must be positive")]
    ClipDuration(String),
    #[error("clip {0}: needs at least 2 waypoints")]
    TooFewWaypoints(String),
    #[error("clip {0}: waypoint times must start at 0, strictly increase and end at duration_ms")]
    WaypointTiming(String),
    #[error("clip {0}: non-finite waypoint")]
    WaypointValue(String),
    #[error("duplicate display id {0}")]
    DuplicateDisplay(String),
    #[error("viewport {0}: top_view requires a positive world_rect")]
    MissingWorldRect(String),
    #[error("viewport {0}: first_person must not have a world_rect")]
    UnexpectedWorldRect(String),
    #[error("top-view viewports {0} and {1} overlap")]
    OverlappingViewports(String, String),
    #[error("duplicate calibration for display {0}")]
    DuplicateCalibration(String),
    #[error(transparent)]
    Tangible(#[from] RegistrationError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
}

impl ConfigError {
    /// 1-based source line, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Parse { line, .. } => Some(*line),
            ConfigError::Validation(_) => None,
        }
    }
}

pub(crate) fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn toml_error(source: &str, err: toml::de::Error) -> ConfigError {
    let (line, column) = err.span().map_or((1, 1), |s| line_col(source, s.start));
    ConfigError::Parse {
        line,
        column,
        message: err.message().to_owned(),
    }
}

/// Parses and validates an environment config.
pub fn load_environment(source: &str) -> Result<Environment, ConfigError> {
    let mut env: Environment = toml::from_str(source).map_err(|e| toml_error(source, e))?;
    env.normalize();
    env.validate()?;
    Ok(env)
}

/// Parses a standalone calibration file (one `[[calibrations]]` table or a
/// bare calibration table).
pub fn load_calibration(source: &str) -> Result<DisplayCalibration<f64>, ConfigError> {
    toml::from_str(source).map_err(|e| {
        // `try_from` failures surface as custom serde errors without a span
        let msg = e.message().to_owned();
        if e.span().is_none() {
            ConfigError::Parse {
                line: 1,
                column: 1,
                message: msg,
            }
        } else {
            toml_error(source, e)
        }
    })
}

/// Serializes back to the config format; `load_environment` of the result
/// yields an identical environment.
pub fn to_config_string(env: &Environment) -> String {
    toml::to_string(env).expect("environment is always representable")
}

/// Switches between real labels and the `Scene N` enumeration.
pub fn anonymize_labels(env: Environment, on: bool) -> Environment {
    Environment {
        anonymized: on,
        ..env
    }
}

impl Environment {
    fn normalize(&mut self) {
        for (i, field) in self.fields.iter_mut().enumerate() {
            field.ordinal = i as u32 + 1;
        }
        for clip in &mut self.clips {
            for w in &mut clip.waypoints {
                w.heading_deg = normalize_degrees(w.heading_deg);
            }
        }
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let [w, h] = self.world_size;
        if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
            return Err(ValidationError::WorldSize);
        }

        let mut clip_ids = BTreeSet::new();
        for clip in &self.clips {
            if !clip_ids.insert(clip.id.as_str()) {
                return Err(ValidationError::DuplicateClip(clip.id.clone()));
            }
            if clip.duration_ms == 0 {
                return Err(ValidationError::ClipDuration(clip.id.clone()));
            }
            if clip.waypoints.len() < 2 {
                return Err(ValidationError::TooFewWaypoints(clip.id.clone()));
            }
            let increasing = clip.waypoints.windows(2).all(|p| p[0].t_ms < p[1].t_ms);
            let first = clip.waypoints[0].t_ms;
            let last = clip.waypoints[clip.waypoints.len() - 1].t_ms;
            if !increasing || first != 0 || last != clip.duration_ms {
                return Err(ValidationError::WaypointTiming(clip.id.clone()));
            }
            if clip
                .waypoints
                .iter()
                .any(|w| !(w.x.is_finite() && w.y.is_finite() && w.heading_deg.is_finite()))
            {
                return Err(ValidationError::WaypointValue(clip.id.clone()));
            }
        }

        let mut field_ids = BTreeSet::new();
        for field in &self.fields {
            if !field_ids.insert(field.id.as_str()) {
                return Err(ValidationError::DuplicateField(field.id.clone()));
            }
            if !clip_ids.contains(field.clip_id.as_str()) {
                return Err(ValidationError::UnknownClip {
                    field: field.id.clone(),
                    clip: field.clip_id.clone(),
                });
            }
            if field.region.is_degenerate() {
                return Err(ValidationError::DegenerateRegion(field.id.clone()));
            }
            if let Region::Polygon { vertices } = &field.region {
                if !is_convex(vertices) {
                    return Err(ValidationError::NonConvexRegion(field.id.clone()));
                }
            }
            if let Some(p) = &field.assigned_pattern_id {
                if !field.allows(p) {
                    return Err(ValidationError::AssignedNotAllowed {
                        field: field.id.clone(),
                        pattern: p.clone(),
                    });
                }
            }
        }

        let mut display_ids = BTreeSet::new();
        for vp in &self.layout {
            if !display_ids.insert(vp.display_id.as_str()) {
                return Err(ValidationError::DuplicateDisplay(vp.display_id.clone()));
            }
            match (vp.role, &vp.world_rect) {
                (ViewRole::TopView, Some(r)) if r.width > 0.0 && r.height > 0.0 => {}
                (ViewRole::TopView, _) => {
                    return Err(ValidationError::MissingWorldRect(vp.display_id.clone()))
                }
                (ViewRole::FirstPerson, Some(_)) => {
                    return Err(ValidationError::UnexpectedWorldRect(vp.display_id.clone()))
                }
                (ViewRole::FirstPerson, None) => {}
            }
        }
        let tops: Vec<(&str, Rect)> = self
            .layout
            .iter()
            .filter_map(|v| v.world_rect.map(|r| (v.display_id.as_str(), r)))
            .collect();
        for (i, (a, ra)) in tops.iter().enumerate() {
            for (b, rb) in &tops[i + 1..] {
                if ra.overlaps(rb) {
                    return Err(ValidationError::OverlappingViewports(
                        (*a).to_owned(),
                        (*b).to_owned(),
                    ));
                }
            }
        }

        self.registry()?;

        let mut cal_ids = BTreeSet::new();
        for cal in &self.calibrations {
            if !cal_ids.insert(cal.display_id()) {
                return Err(ValidationError::DuplicateCalibration(cal.display_id().to_owned()));
            }
        }
        Ok(())
    }

    /// The tangibles of this environment as a separability-checked registry.
    pub fn registry(&self) -> Result<TangibleRegistry<f64>, RegistrationError> {
        let mut reg = TangibleRegistry::new();
        for spec in &self.tangibles {
            reg.register(spec.clone())?;
        }
        Ok(reg)
    }

    pub fn field(&self, id: &str) -> Option<&ScenarioField> {
        self.fields.iter().find(|f| f.id == id)
    }

    pub fn clip(&self, id: &str) -> Option<&MotionClip> {
        self.clips.iter().find(|c| c.id == id)
    }

    pub fn calibration(&self, display_id: &str) -> Option<&DisplayCalibration<f64>> {
        self.calibrations.iter().find(|c| c.display_id() == display_id)
    }

    /// Field containing `p`; overlaps resolve to the lowest ordinal.
    pub fn hit_test(&self, p: Point) -> Option<&ScenarioField> {
        self.fields
            .iter()
            .filter(|f| f.region.contains(p))
            .min_by_key(|f| f.ordinal)
    }

    pub fn displayed_labels(&self) -> Vec<String> {
        self.fields
            .iter()
            .map(|f| f.displayed_label(self.anonymized).into_owned())
            .collect()
    }
}
