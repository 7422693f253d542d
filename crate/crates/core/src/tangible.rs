//! Registered tangibles (pin layouts and their distance signatures) and
//! per-display calibrations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Affine2, Point2};
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE_MM: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangibleRole {
    Vehicle,
    ViewController,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RegistrationError {
    #[error("tangible {id}: pins are collinear")]
    Collinear { id: String },
    #[error("tangible {id}: signature self-margin violated (gap {gap:.3} mm < {required:.3} mm)")]
    SelfMargin { id: String, gap: f64, required: f64 },
    #[error("signature separability violated between tangibles {first} and {second} (max slot gap {gap:.3} mm < {required:.3} mm)")]
    Separability {
        first: String,
        second: String,
        gap: f64,
        required: f64,
    },
    #[error("tangible {id}: tolerance_mm must be positive and finite")]
    BadTolerance { id: String },
    #[error("duplicate tangible id {id}")]
    DuplicateId { id: String },
}

/// On-disk form of a tangible: everything except the derived signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TangibleDef<T> {
    pub id: String,
    pub role: TangibleRole,
    pub pins: [Point2<T>; 3],
    #[serde(default = "default_tolerance")]
    pub tolerance_mm: T,
}

fn default_tolerance<T: Scalar>() -> T {
    T::lit(DEFAULT_TOLERANCE_MM)
}

/// A validated tangible. Pins are in millimetres, origin at the tangible
/// centre, forward axis +x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TangibleDef<T>", into = "TangibleDef<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TangibleSpec<T> {
    id: String,
    role: TangibleRole,
    pins: [Point2<T>; 3],
    tolerance_mm: T,
    signature: [T; 3],
    /// `opposite[k]` is the pin not touched by the k-th shortest edge.
    opposite: [usize; 3],
}

/// Lengths of the edge opposite each vertex, sorted ascending, with the
/// vertex index that each sorted length faces.
pub(crate) fn sorted_opposite_edges<T: Scalar>(points: &[Point2<T>; 3]) -> ([T; 3], [usize; 3]) {
    let lengths = [
        points[1].distance(points[2]),
        points[0].distance(points[2]),
        points[0].distance(points[1]),
    ];
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| {
        lengths[i]
            .partial_cmp(&lengths[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    ([lengths[order[0]], lengths[order[1]], lengths[order[2]]], order)
}

pub(crate) fn is_collinear<T: Scalar>(points: &[Point2<T>; 3]) -> bool {
    let twice_area = (points[1] - points[0]).cross(points[2] - points[0]).abs();
    let (sig, _) = sorted_opposite_edges(points);
    let longest = sig[2];
    !(twice_area > T::epsilon() * T::lit(64.0) * longest * longest)
}

impl<T: Scalar> TangibleSpec<T> {
    pub fn new(
        id: impl Into<String>,
        role: TangibleRole,
        pins: [Point2<T>; 3],
        tolerance_mm: T,
    ) -> Result<Self, RegistrationError> {
        let id = id.into();
        if !(tolerance_mm > T::zero()) || !tolerance_mm.is_finite() {
            return Err(RegistrationError::BadTolerance { id });
        }
        if pins.iter().any(|p| !p.is_finite()) || is_collinear(&pins) {
            return Err(RegistrationError::Collinear { id });
        }
        let (signature, opposite) = sorted_opposite_edges(&pins);
        let required = tolerance_mm + tolerance_mm;
        let gap = (signature[1] - signature[0]).min(signature[2] - signature[1]);
        if gap < required {
            return Err(RegistrationError::SelfMargin {
                id,
                gap: gap.as_f64(),
                required: required.as_f64(),
            });
        }
        Ok(Self {
            id,
            role,
            pins,
            tolerance_mm,
            signature,
            opposite,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn role(&self) -> TangibleRole {
        self.role
    }

    pub fn pins(&self) -> &[Point2<T>; 3] {
        &self.pins
    }

    pub fn tolerance_mm(&self) -> T {
        self.tolerance_mm
    }

    /// Sorted pairwise pin distances `[d1 <= d2 <= d3]` in millimetres.
    pub fn signature(&self) -> [T; 3] {
        self.signature
    }

    pub(crate) fn opposite(&self) -> [usize; 3] {
        self.opposite
    }

    /// True when every signature slot of `distances` lies within tolerance.
    pub fn accepts(&self, distances: &[T; 3]) -> bool {
        self.signature
            .iter()
            .zip(distances)
            .all(|(&s, &d)| (s - d).abs() <= self.tolerance_mm)
    }
}

impl<T: Scalar> TryFrom<TangibleDef<T>> for TangibleSpec<T> {
    type Error = RegistrationError;
    fn try_from(def: TangibleDef<T>) -> Result<Self, Self::Error> {
        Self::new(def.id, def.role, def.pins, def.tolerance_mm)
    }
}

impl<T: Scalar> From<TangibleSpec<T>> for TangibleDef<T> {
    fn from(spec: TangibleSpec<T>) -> Self {
        Self {
            id: spec.id,
            role: spec.role,
            pins: spec.pins,
            tolerance_mm: spec.tolerance_mm,
        }
    }
}

/// Checks that two signatures can never both accept the same triad.
pub fn check_separable<T: Scalar>(
    first: &TangibleSpec<T>,
    second: &TangibleSpec<T>,
) -> Result<(), RegistrationError> {
    let gap = first
        .signature
        .iter()
        .zip(&second.signature)
        .map(|(&a, &b)| (a - b).abs())
        .fold(T::zero(), T::max);
    let tol = first.tolerance_mm.max(second.tolerance_mm);
    let required = tol + tol;
    if gap < required {
        return Err(RegistrationError::Separability {
            first: first.id.clone(),
            second: second.id.clone(),
            gap: gap.as_f64(),
            required: required.as_f64(),
        });
    }
    Ok(())
}

/// Ordered set of tangibles whose signatures are pairwise separable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TangibleRegistry<T> {
    specs: Vec<TangibleSpec<T>>,
}

impl<T: Scalar> TangibleRegistry<T> {
    pub fn new() -> Self {
        Self { specs: Vec::new() }
    }

    /// Adds `spec` after checking it against every registered tangible.
    pub fn register(&mut self, spec: TangibleSpec<T>) -> Result<&TangibleSpec<T>, RegistrationError> {
        for existing in &self.specs {
            if existing.id == spec.id {
                return Err(RegistrationError::DuplicateId { id: spec.id });
            }
            check_separable(existing, &spec)?;
        }
        self.specs.push(spec);
        Ok(self.specs.last().expect("just pushed"))
    }

    /// Adds `spec` without the separability check. Only useful for
    /// exercising the runtime ambiguity path.
    pub fn register_unchecked(&mut self, spec: TangibleSpec<T>) {
        self.specs.push(spec);
    }

    pub fn get(&self, id: &str) -> Option<&TangibleSpec<T>> {
        self.specs.iter().find(|s| s.id == id)
    }

    pub fn specs(&self) -> &[TangibleSpec<T>] {
        &self.specs
    }

    pub fn iter(&self) -> impl Iterator<Item = &TangibleSpec<T>> {
        self.specs.iter()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration for {display_id}: transform is not invertible")]
    NotInvertible { display_id: String },
    #[error("calibration for {display_id}: pixel_pitch_mm must be positive")]
    BadPitch { display_id: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct CalibrationDef<T> {
    pub display_id: String,
    pub transform: Affine2<T>,
    pub pixel_pitch_mm: T,
}

/// Maps a display's touch pixels to world metres (`transform`) and to
/// device millimetres (`pixel_pitch_mm`, mm per pixel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CalibrationDef<T>", into = "CalibrationDef<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct DisplayCalibration<T> {
    display_id: String,
    transform: Affine2<T>,
    pixel_pitch_mm: T,
}

impl<T: Scalar> DisplayCalibration<T> {
    pub fn new(
        display_id: impl Into<String>,
        transform: Affine2<T>,
        pixel_pitch_mm: T,
    ) -> Result<Self, CalibrationError> {
        let display_id = display_id.into();
        if transform.inverse().is_none() {
            return Err(CalibrationError::NotInvertible { display_id });
        }
        if !(pixel_pitch_mm > T::zero()) || !pixel_pitch_mm.is_finite() {
            return Err(CalibrationError::BadPitch { display_id });
        }
        Ok(Self {
            display_id,
            transform,
            pixel_pitch_mm,
        })
    }

    /// Pixels equal millimetres equal world units.
    pub fn identity(display_id: impl Into<String>) -> Self {
        Self::new(display_id, Affine2::identity(), T::one()).expect("identity is valid")
    }

    pub fn display_id(&self) -> &str {
        &self.display_id
    }

    pub fn transform(&self) -> &Affine2<T> {
        &self.transform
    }

    pub fn pixel_pitch_mm(&self) -> T {
        self.pixel_pitch_mm
    }

    pub fn px_to_mm(&self, p: Point2<T>) -> Point2<T> {
        p.scale(self.pixel_pitch_mm)
    }

    pub fn mm_to_px(&self, p: Point2<T>) -> Point2<T> {
        p.scale(T::one() / self.pixel_pitch_mm)
    }

    pub fn px_to_world(&self, p: Point2<T>) -> Point2<T> {
        self.transform.apply(p)
    }

    pub fn world_to_px(&self, p: Point2<T>) -> Point2<T> {
        self.transform
            .inverse()
            .expect("validated invertible")
            .apply(p)
    }
}

impl<T: Scalar> TryFrom<CalibrationDef<T>> for DisplayCalibration<T> {
    type Error = CalibrationError;
    fn try_from(def: CalibrationDef<T>) -> Result<Self, Self::Error> {
        Self::new(def.display_id, def.transform, def.pixel_pitch_mm)
    }
}

impl<T: Scalar> From<DisplayCalibration<T>> for CalibrationDef<T> {
    fn from(c: DisplayCalibration<T>) -> Self {
        Self {
            display_id: c.display_id,
            transform: c.transform,
            pixel_pitch_mm: c.pixel_pitch_mm,
        }
    }
}
