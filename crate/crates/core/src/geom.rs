//! Planar geometry kernels, generic over the scalar type.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A point (or vector) in the plane. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T> From<[T; 2]> for Point2<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T> From<Point2<T>> for [T; 2] {
    fn from(p: Point2<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3-D cross product.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    /// Counter-clockwise rotation (in the x-to-y sense) by `angle` radians.
    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        self.scale(k)
    }
}

pub fn centroid<T: Scalar>(points: &[Point2<T>]) -> Point2<T> {
    let n = T::from_usize(points.len()).unwrap_or_else(T::one);
    let sum = points.iter().fold(Point2::zero(), |acc, &p| acc + p);
    sum.scale(T::one() / n)
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_degrees<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let mut r = deg % full;
    if r < T::zero() {
        r = r + full;
    }
    // -tiny + 360 can round up to exactly 360
    if r >= full || r == T::zero() {
        r = T::zero();
    }
    r
}

/// Smallest absolute difference between two headings, in `[0, 180]`.
pub fn heading_delta<T: Scalar>(a: T, b: T) -> T {
    let d = normalize_degrees(a - b);
    if d > T::lit(180.0) {
        T::lit(360.0) - d
    } else {
        d
    }
}

/// Heading (degrees, `[0, 360)`) of a direction vector in the x-to-y sense.
pub fn heading_of<T: Scalar>(v: Point2<T>) -> T {
    normalize_degrees(v.y.atan2(v.x).to_degrees())
}

/// Signed shoelace area; positive when vertices wind from +x towards +y.
pub fn signed_area<T: Scalar>(vertices: &[Point2<T>]) -> T {
    let n = vertices.len();
    if n < 3 {
        return T::zero();
    }
    let twice = (0..n).fold(T::zero(), |acc, i| {
        acc + vertices[i].cross(vertices[(i + 1) % n])
    });
    twice / T::lit(2.0)
}

/// True when every turn has the same orientation (collinear turns allowed).
pub fn is_convex<T: Scalar>(vertices: &[Point2<T>]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0i8;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        let turn = (b - a).cross(c - b);
        let s = if turn > T::zero() {
            1
        } else if turn < T::zero() {
            -1
        } else {
            0
        };
        if s != 0 {
            if sign != 0 && s != sign {
                return false;
            }
            sign = s;
        }
    }
    sign != 0
}

/// Point-in-convex-polygon test, boundary inclusive. Either winding order.
pub fn convex_contains<T: Scalar>(vertices: &[Point2<T>], p: Point2<T>) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let orientation = signed_area(vertices);
    (0..n).all(|i| {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let side = (b - a).cross(p - a);
        if orientation >= T::zero() {
            side >= T::zero()
        } else {
            side <= T::zero()
        }
    })
}

/// Affine map `p -> [a b; d e] p + [c; f]`. Serialized as `[a, b, c, d, e, f]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 6]", into = "[T; 6]")]
#[serde(bound(serialize = "T: Copy + Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Affine2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    pub f: T,
}

impl<T> From<[T; 6]> for Affine2<T> {
    fn from([a, b, c, d, e, f]: [T; 6]) -> Self {
        Self { a, b, c, d, e, f }
    }
}

impl<T> From<Affine2<T>> for [T; 6] {
    fn from(m: Affine2<T>) -> Self {
        [m.a, m.b, m.c, m.d, m.e, m.f]
    }
}

impl<T: Scalar> Affine2<T> {
    pub fn identity() -> Self {
        Self::from([T::one(), T::zero(), T::zero(), T::zero(), T::one(), T::zero()])
    }

    pub fn scaling(k: T) -> Self {
        Self::from([k, T::zero(), T::zero(), T::zero(), k, T::zero()])
    }

    pub fn determinant(&self) -> T {
        self.a * self.e - self.b * self.d
    }

    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        let v = self.apply_linear(p);
        Point2::new(v.x + self.c, v.y + self.f)
    }

    /// Applies only the linear part; used for direction vectors.
    pub fn apply_linear(&self, v: Point2<T>) -> Point2<T> {
        Point2::new(self.a * v.x + self.b * v.y, self.d * v.x + self.e * v.y)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let inv = T::one() / det;
        let a = self.e * inv;
        let b = -self.b * inv;
        let d = -self.d * inv;
        let e = self.a * inv;
        let c = -(a * self.c + b * self.f);
        let f = -(d * self.c + e * self.f);
        Some(Self::from([a, b, c, d, e, f]))
    }
}

/// Proper rigid motion: rotation (radians) then translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rigid2<T> {
    pub rotation: T,
    pub translation: Point2<T>,
}

impl<T: Scalar> Rigid2<T> {
    pub fn new(rotation: T, translation: Point2<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        p.rotate(self.rotation) + self.translation
    }
}

/// Result of a least-squares rigid fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidFit<T> {
    pub transform: Rigid2<T>,
    /// Root-mean-square distance between transformed source and target points.
    pub rms: T,
}

/// Closed-form 2-D Procrustes: the rotation + translation that best maps
/// `source[i]` onto `target[i]` in the least-squares sense. Reflections and
/// scaling are excluded. Returns `None` when the rotation is undetermined
/// (fewer than two distinct source points, or mismatched lengths).
pub fn fit_rigid<T: Scalar>(source: &[Point2<T>], target: &[Point2<T>]) -> Option<RigidFit<T>> {
    if source.len() != target.len() || source.len() < 2 {
        return None;
    }
    let sc = centroid(source);
    let tc = centroid(target);
    let (dot, cross) = source
        .iter()
        .zip(target)
        .fold((T::zero(), T::zero()), |(d, c), (&s, &t)| {
            let a = s - sc;
            let b = t - tc;
            (d + a.dot(b), c + a.cross(b))
        });
    let spread = source
        .iter()
        .fold(T::zero(), |acc, &s| acc + (s - sc).dot(s - sc));
    if !(spread > T::zero()) || (dot == T::zero() && cross == T::zero()) {
        return None;
    }
    let rotation = cross.atan2(dot);
    let translation = tc - sc.rotate(rotation);
    let transform = Rigid2::new(rotation, translation);
    let n = T::from_usize(source.len()).unwrap_or_else(T::one);
    let sq = source.iter().zip(target).fold(T::zero(), |acc, (&s, &t)| {
        let r = transform.apply(s) - t;
        acc + r.dot(r)
    });
    Some(RigidFit {
        transform,
        rms: (sq / n).sqrt(),
    })
}
