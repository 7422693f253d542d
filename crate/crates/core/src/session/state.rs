use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::pattern::{parse, Bindings, ParseError, PatternProgram, Rgb};
use crate::scene::Environment;
use crate::tangible::TangibleRole;
use crate::Pose;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Playback {
    Idle,
    Playing {
        field_id: String,
        clip_id: String,
        epoch_ms: u64,
    },
}

/// The authoritative world snapshot. Every map is ordered so that the
/// serialized form is canonical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub seq: u64,
    pub environment_id: String,
    pub tangibles: BTreeMap<String, Pose>,
    pub active_field_id: Option<String>,
    pub camera_pose: Option<Pose>,
    /// field id -> assigned pattern id
    pub assignments: BTreeMap<String, String>,
    /// field id -> pattern id -> colour overrides
    pub bindings: BTreeMap<String, BTreeMap<String, Bindings>>,
    pub brightness: f64,
    pub playback: Playback,
    pub anonymized: bool,
    /// Patterns authored during the session, keyed by id.
    #[serde(default)]
    pub custom_patterns: BTreeMap<String, PatternProgram>,
    /// field id -> session-authored patterns allowed there
    #[serde(default)]
    pub extra_allowed: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body")]
pub enum Event {
    TangiblePlaced {
        tangible_id: String,
        pose: Pose,
    },
    TangibleMoved {
        tangible_id: String,
        pose: Pose,
    },
    TangibleRemoved {
        tangible_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pose: Option<Pose>,
    },
    PatternAssigned {
        field_id: String,
        pattern_id: String,
    },
    ColorChanged {
        field_id: String,
        param: String,
        rgb: Rgb,
    },
    BrightnessChanged {
        value: f64,
    },
    AnonymizeToggled {
        flag: bool,
    },
    EnvironmentSwitched {
        environment_id: String,
    },
    /// Designer-authored pattern source, made selectable on `fields`.
    PatternDefined {
        source: String,
        #[serde(default)]
        fields: Vec<String>,
    },
}

impl Event {
    pub fn type_name(&self) -> &'static str {
        match self {
            Event::TangiblePlaced { .. } => "TangiblePlaced",
            Event::TangibleMoved { .. } => "TangibleMoved",
            Event::TangibleRemoved { .. } => "TangibleRemoved",
            Event::PatternAssigned { .. } => "PatternAssigned",
            Event::ColorChanged { .. } => "ColorChanged",
            Event::BrightnessChanged { .. } => "BrightnessChanged",
            Event::AnonymizeToggled { .. } => "AnonymizeToggled",
            Event::EnvironmentSwitched { .. } => "EnvironmentSwitched",
            Event::PatternDefined { .. } => "PatternDefined",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ApplyError {
    #[error("unknown tangible {0}")]
    UnknownTangible(String),
    #[error("tangible {0} is not on the table")]
    NotPlaced(String),
    #[error("pose is not finite")]
    BadPose,
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("unknown pattern {0}")]
    UnknownPattern(String),
    #[error("pattern {pattern} is not allowed on field {field}")]
    PatternNotAllowed { field: String, pattern: String },
    #[error("field {0} has no pattern assigned")]
    NoPatternAssigned(String),
    #[error("pattern {pattern} has no param {param}")]
    UnknownParam { pattern: String, param: String },
    #[error("brightness {0} outside [0, 1]")]
    BrightnessOutOfRange(f64),
    #[error("unknown environment {0}")]
    UnknownEnvironment(String),
    #[error("pattern source: {0}")]
    Parse(#[from] ParseError),
    #[error("pattern id {0} is already provided by the library")]
    PatternExists(String),
}

impl ApplyError {
    /// Stable machine-readable class for `error` messages.
    pub fn code(&self) -> &'static str {
        match self {
            ApplyError::UnknownTangible(_)
            | ApplyError::UnknownField(_)
            | ApplyError::UnknownPattern(_)
            | ApplyError::UnknownEnvironment(_) => "unknown_id",
            ApplyError::UnknownParam { .. } => "unknown_param",
            ApplyError::NotPlaced(_) => "not_placed",
            ApplyError::BadPose => "bad_pose",
            ApplyError::PatternNotAllowed { .. } => "pattern_not_allowed",
            ApplyError::NoPatternAssigned(_) => "no_pattern",
            ApplyError::BrightnessOutOfRange(_) => "brightness_range",
            ApplyError::Parse(_) => "parse",
            ApplyError::PatternExists(_) => "pattern_exists",
        }
    }
}

impl SessionState {
    /// Fresh session (seq 0) in the catalog's first environment.
    pub fn initial(catalog: &Catalog) -> Self {
        let env = catalog.default_environment();
        Self {
            seq: 0,
            environment_id: env.id.clone(),
            tangibles: BTreeMap::new(),
            active_field_id: None,
            camera_pose: None,
            assignments: default_assignments(env),
            bindings: BTreeMap::new(),
            brightness: 1.0,
            playback: Playback::Idle,
            anonymized: false,
            custom_patterns: BTreeMap::new(),
            extra_allowed: BTreeMap::new(),
        }
    }

    pub fn environment<'c>(&self, catalog: &'c Catalog) -> &'c Environment {
        catalog
            .environment(&self.environment_id)
            .expect("state only references catalog environments")
    }

    pub fn pattern<'a>(&'a self, catalog: &'a Catalog, id: &str) -> Option<&'a PatternProgram> {
        self.custom_patterns.get(id).or_else(|| catalog.pattern(id))
    }

    /// Allowed patterns of a field: config list, then session-authored ones.
    pub fn allowed_patterns(&self, env: &Environment, field_id: &str) -> Vec<String> {
        let mut out: Vec<String> = env
            .field(field_id)
            .map(|f| f.allowed_pattern_ids.clone())
            .unwrap_or_default();
        if let Some(extra) = self.extra_allowed.get(field_id) {
            out.extend(extra.iter().filter(|p| !out.contains(p)).cloned().collect::<Vec<_>>());
        }
        out
    }

    /// Colour bindings in effect for `field_id`'s assigned pattern.
    pub fn effective_bindings<'a>(&'a self, catalog: &'a Catalog, field_id: &str) -> Option<(&'a PatternProgram, Bindings)> {
        let pattern_id = self.assignments.get(field_id)?;
        let program = self.pattern(catalog, pattern_id)?;
        let mut bindings = program.default_bindings();
        if let Some(overrides) = self.bindings.get(field_id).and_then(|m| m.get(pattern_id)) {
            for (k, v) in overrides {
                if let Some(slot) = bindings.get_mut(k) {
                    *slot = *v;
                }
            }
        }
        Some((program, bindings))
    }

    /// The first registered vehicle that is on the table.
    pub fn vehicle_pose(&self, catalog: &Catalog) -> Option<Pose> {
        catalog
            .registry()
            .iter()
            .filter(|s| s.role() == TangibleRole::Vehicle)
            .find_map(|s| self.tangibles.get(s.id()).copied())
    }

    fn refresh_activation(&mut self, catalog: &Catalog, t_ms: u64, force_restart: bool) {
        let env = self.environment(catalog);
        let active = self
            .vehicle_pose(catalog)
            .and_then(|p| env.hit_test(p.position()))
            .map(|f| (f.id.clone(), f.clip_id.clone()));
        let previous = self.active_field_id.clone();
        match active {
            Some((field_id, clip_id)) => {
                if force_restart || previous.as_deref() != Some(field_id.as_str()) {
                    self.playback = Playback::Playing {
                        field_id: field_id.clone(),
                        clip_id,
                        epoch_ms: t_ms,
                    };
                }
                self.active_field_id = Some(field_id);
            }
            None => {
                self.active_field_id = None;
                self.playback = Playback::Idle;
            }
        }
    }

    fn refresh_camera(&mut self, catalog: &Catalog) {
        self.camera_pose = catalog
            .registry()
            .iter()
            .filter(|s| s.role() == TangibleRole::ViewController)
            .find_map(|s| self.tangibles.get(s.id()).copied());
    }
}

fn default_assignments(env: &Environment) -> BTreeMap<String, String> {
    env.fields
        .iter()
        .filter_map(|f| f.assigned_pattern_id.clone().map(|p| (f.id.clone(), p)))
        .collect()
}

fn pose_ok(p: &Pose) -> bool {
    p.x_m.is_finite() && p.y_m.is_finite() && p.heading_deg.is_finite() && p.residual_mm.is_finite()
}

/// Pure state transition. On success the result has `seq + 1`; on error
/// nothing changes. `t_ms` is the server time the event was sequenced at and
/// becomes the playback epoch when the vehicle enters a field.
pub fn apply(
    catalog: &Catalog,
    state: &SessionState,
    event: &Event,
    t_ms: u64,
) -> Result<SessionState, ApplyError> {
    let mut next = state.clone();
    let env = state.environment(catalog);
    let mut force_restart = false;
    let field = |id: &str| env.field(id).ok_or_else(|| ApplyError::UnknownField(id.to_owned()));

    match event {
        Event::TangiblePlaced { tangible_id, pose } | Event::TangibleMoved { tangible_id, pose } => {
            catalog
                .tangible(tangible_id)
                .ok_or_else(|| ApplyError::UnknownTangible(tangible_id.clone()))?;
            if !pose_ok(pose) {
                return Err(ApplyError::BadPose);
            }
            let mut pose = *pose;
            pose.heading_deg = crate::geom::normalize_degrees(pose.heading_deg);
            next.tangibles.insert(tangible_id.clone(), pose);
        }
        Event::TangibleRemoved { tangible_id, .. } => {
            catalog
                .tangible(tangible_id)
                .ok_or_else(|| ApplyError::UnknownTangible(tangible_id.clone()))?;
            if next.tangibles.remove(tangible_id).is_none() {
                return Err(ApplyError::NotPlaced(tangible_id.clone()));
            }
        }
        Event::PatternAssigned {
            field_id,
            pattern_id,
        } => {
            field(field_id)?;
            if state.pattern(catalog, pattern_id).is_none() {
                return Err(ApplyError::UnknownPattern(pattern_id.clone()));
            }
            if !state.allowed_patterns(env, field_id).contains(pattern_id) {
                return Err(ApplyError::PatternNotAllowed {
                    field: field_id.clone(),
                    pattern: pattern_id.clone(),
                });
            }
            next.assignments.insert(field_id.clone(), pattern_id.clone());
        }
        Event::ColorChanged {
            field_id,
            param,
            rgb,
        } => {
            field(field_id)?;
            let pattern_id = state
                .assignments
                .get(field_id)
                .ok_or_else(|| ApplyError::NoPatternAssigned(field_id.clone()))?;
            let program = state
                .pattern(catalog, pattern_id)
                .ok_or_else(|| ApplyError::UnknownPattern(pattern_id.clone()))?;
            if program.param(param).is_none() {
                return Err(ApplyError::UnknownParam {
                    pattern: pattern_id.clone(),
                    param: param.clone(),
                });
            }
            next.bindings
                .entry(field_id.clone())
                .or_default()
                .entry(pattern_id.clone())
                .or_default()
                .insert(param.clone(), *rgb);
        }
        Event::BrightnessChanged { value } => {
            if !(0.0..=1.0).contains(value) {
                return Err(ApplyError::BrightnessOutOfRange(*value));
            }
            next.brightness = *value;
        }
        Event::AnonymizeToggled { flag } => next.anonymized = *flag,
        Event::EnvironmentSwitched { environment_id } => {
            let target = catalog
                .environment(environment_id)
                .ok_or_else(|| ApplyError::UnknownEnvironment(environment_id.clone()))?;
            next.environment_id = target.id.clone();
            next.assignments = default_assignments(target);
            next.bindings.clear();
            next.extra_allowed.clear();
            next.active_field_id = None;
            force_restart = true;
        }
        Event::PatternDefined { source, fields } => {
            let program = parse(source)?;
            if catalog.pattern(&program.id).is_some() {
                return Err(ApplyError::PatternExists(program.id));
            }
            for f in fields {
                field(f)?;
            }
            // a redefinition may drop params; forget overrides that no longer apply
            for per_field in next.bindings.values_mut() {
                if let Some(overrides) = per_field.get_mut(&program.id) {
                    overrides.retain(|k, _| program.param(k).is_some());
                }
            }
            for f in fields {
                next.extra_allowed
                    .entry(f.clone())
                    .or_default()
                    .insert(program.id.clone());
            }
            next.custom_patterns.insert(program.id.clone(), program);
        }
    }

    next.refresh_activation(catalog, t_ms, force_restart);
    next.refresh_camera(catalog);
    next.seq = state.seq + 1;
    Ok(next)
}
