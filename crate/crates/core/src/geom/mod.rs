//! Geometric primitives shared by every stage of the pipeline.
//!
//! Conventions
//! - Scene units: the generator works inside the unit ball; imported scenes may
//!   extend to `[-3, 3]` on each axis.
//! - Predicates take an explicit tolerance; [`EPS`] is the module-wide default.
//! - Quaternions are scalar-first `(qw, qx, qy, qz)`, right-handed. A camera
//!   with identity orientation looks along `-z` with `+y` up.

mod rng;
mod sampling;

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rng::{RngStream, UniformSource};
pub use sampling::{marsaglia_sphere_point, sample_point_in_ball, sample_unit_direction, MAX_REJECTIONS};

/// Default tolerance for geometric predicates, in scene units.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("rejection sampler gave up after {0} attempts")]
    SamplingExhausted(usize),
    #[error("look-at is degenerate: forward direction is parallel to up")]
    DegenerateLookAt,
    #[error("cannot normalize a zero-length vector")]
    ZeroLength,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn normalized(self) -> Result<UnitVec3, GeomError> {
        UnitVec3::new(self)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A direction of unit length (within 1e-9).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    pub fn new(v: Vec3) -> Result<Self, GeomError> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(GeomError::ZeroLength);
        }
        Ok(Self(v / n))
    }

    /// Wraps a vector the caller already knows to be unit length.
    pub(crate) fn new_unchecked(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() <= 1e-9, "not unit: {v}");
        Self(v)
    }

    pub fn get(self) -> Vec3 {
        self.0
    }
}

impl std::ops::Deref for UnitVec3 {
    type Target = Vec3;
    fn deref(&self) -> &Vec3 {
        &self.0
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;
    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

/// Plane through `point` with unit `normal`; positive side is where
/// `normal · (x - point) > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub point: Vec3,
    pub normal: UnitVec3,
}

impl Plane {
    pub fn new(point: Vec3, normal: UnitVec3) -> Self {
        Self { point, normal }
    }

    /// Plane `normal · x = offset`.
    pub fn from_offset(normal: UnitVec3, offset: f64) -> Self {
        Self { point: normal.get() * offset, normal }
    }

    pub fn offset(&self) -> f64 {
        self.normal.dot(self.point)
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p - self.point)
    }
}

/// Infinite line `point + t * direction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub point: Vec3,
    pub direction: UnitVec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LineIntersection {
    Line(Line),
    Parallel,
}

/// Intersection line of two planes, or `Parallel` when `|n_a × n_b| <= tol`.
pub fn plane_plane_line(a: &Plane, b: &Plane, tol: f64) -> LineIntersection {
    let cross = a.normal.cross(*b.normal);
    let len = cross.norm();
    if len <= tol {
        return LineIntersection::Parallel;
    }
    let direction = UnitVec3::new_unchecked(cross / len);
    // Point on both planes closest to the origin: the third constraint pins the
    // component along the line direction to zero.
    let third = Plane::from_offset(direction, 0.0);
    let point = solve3(
        [*a.normal, *b.normal, *third.normal],
        [a.offset(), b.offset(), 0.0],
    )
    .map(|(p, _)| p)
    .unwrap_or(Vec3::ZERO);
    LineIntersection::Line(Line { point, direction })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointIntersection {
    Point(Vec3),
    Degenerate,
}

/// Common point of three planes; `Degenerate` when `|det| <= tol`.
pub fn three_plane_point(a: &Plane, b: &Plane, c: &Plane, tol: f64) -> PointIntersection {
    match solve3(
        [*a.normal, *b.normal, *c.normal],
        [a.offset(), b.offset(), c.offset()],
    ) {
        Some((p, det)) if det.abs() > tol => PointIntersection::Point(p),
        _ => PointIntersection::Degenerate,
    }
}

/// Cramer's rule for rows `n_i · x = d_i`. Returns the solution and the
/// determinant, or `None` when the determinant is exactly zero.
fn solve3(rows: [Vec3; 3], d: [f64; 3]) -> Option<(Vec3, f64)> {
    let [r0, r1, r2] = rows;
    let c12 = r1.cross(r2);
    let c20 = r2.cross(r0);
    let c01 = r0.cross(r1);
    let det = r0.dot(c12);
    if det == 0.0 {
        return None;
    }
    let p = (c12 * d[0] + c20 * d[1] + c01 * d[2]) / det;
    Some((p, det))
}

/// Unit quaternion, scalar first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { qw: 1.0, qx: 0.0, qy: 0.0, qz: 0.0 };

    pub const fn new(qw: f64, qx: f64, qy: f64, qz: f64) -> Self {
        Self { qw, qx, qy, qz }
    }

    pub fn norm(&self) -> f64 {
        (self.qw * self.qw + self.qx * self.qx + self.qy * self.qy + self.qz * self.qz).sqrt()
    }

    /// Scales to unit norm. Quaternions already unit within 1e-12 come back
    /// bit-for-bit unchanged so replayed poses reproduce renders exactly.
    pub fn normalized(self) -> Result<Self, GeomError> {
        let n = self.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(GeomError::ZeroLength);
        }
        if (n - 1.0).abs() <= 1e-12 {
            return Ok(self);
        }
        Ok(Self::new(self.qw / n, self.qx / n, self.qy / n, self.qz / n))
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.qw, self.qx, self.qy, self.qz]
    }

    /// Rotation matrix (row-major) of a unit quaternion.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { qw: w, qx: x, qy: y, qz: z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let m = self.to_matrix();
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// Quaternion of a proper rotation matrix given by its columns
    /// (Shepperd's branch selection). The scalar part is made non-negative.
    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        let (m00, m01, m02) = (c0.x, c1.x, c2.x);
        let (m10, m11, m12) = (c0.y, c1.y, c2.y);
        let (m20, m21, m22) = (c0.z, c1.z, c2.z);
        let trace = m00 + m11 + m22;
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quaternion::new(0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
        } else if m00 > m11 && m00 > m22 {
            let s = (1.0 + m00 - m11 - m22).sqrt() * 2.0;
            Quaternion::new((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
        } else if m11 > m22 {
            let s = (1.0 + m11 - m00 - m22).sqrt() * 2.0;
            Quaternion::new((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
        } else {
            let s = (1.0 + m22 - m00 - m11).sqrt() * 2.0;
            Quaternion::new((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
        };
        let q = if q.qw < 0.0 { Quaternion::new(-q.qw, -q.qx, -q.qy, -q.qz) } else { q };
        let n = q.norm();
        Quaternion::new(q.qw / n, q.qx / n, q.qy / n, q.qz / n)
    }
}

/// Camera-frame forward axis for the identity orientation.
pub const CAMERA_FORWARD: Vec3 = Vec3::new(0.0, 0.0, -1.0);
/// Camera-frame up axis for the identity orientation.
pub const CAMERA_UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);

/// Orientation that points a camera at `position` towards `target`.
pub fn look_at(position: Vec3, target: Vec3, up: UnitVec3) -> Result<Quaternion, GeomError> {
    let forward = (target - position).normalized()?;
    let side = forward.cross(*up);
    if side.norm() <= EPS {
        return Err(GeomError::DegenerateLookAt);
    }
    let right = side.normalized()?;
    let true_up = right.cross(*forward);
    Ok(Quaternion::from_columns(*right, true_up, -*forward))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis_plane(axis: usize, offset: f64) -> Plane {
        let n = [UnitVec3::X, UnitVec3::Y, UnitVec3::Z][axis];
        Plane::from_offset(n, offset)
    }

    #[test]
    fn coordinate_planes_meet_along_x_axis() {
        let LineIntersection::Line(l) = plane_plane_line(&axis_plane(2, 0.0), &axis_plane(1, 0.0), EPS)
        else {
            panic!("expected a line")
        };
        assert!((l.direction.x.abs() - 1.0).abs() < 1e-12);
        assert!(l.point.norm() < 1e-12);
    }

    #[test]
    fn parallel_planes_report_parallel() {
        assert_eq!(
            plane_plane_line(&axis_plane(2, 0.0), &axis_plane(2, 0.5), EPS),
            LineIntersection::Parallel
        );
    }

    #[test]
    fn three_axis_planes() {
        let p = three_plane_point(&axis_plane(0, 0.0), &axis_plane(1, 0.0), &axis_plane(2, 0.0), EPS);
        assert_eq!(p, PointIntersection::Point(Vec3::ZERO));
        let PointIntersection::Point(p) =
            three_plane_point(&axis_plane(0, 0.1), &axis_plane(1, 0.2), &axis_plane(2, 0.3), EPS)
        else {
            panic!()
        };
        assert!((p - Vec3::new(0.1, 0.2, 0.3)).norm() < 1e-15);
        let d = three_plane_point(&axis_plane(0, 0.1), &axis_plane(0, 0.4), &axis_plane(2, 0.3), EPS);
        assert_eq!(d, PointIntersection::Degenerate);
    }

    #[test]
    fn look_at_fixtures() {
        let q = look_at(Vec3::new(0.0, 0.0, 5.0), Vec3::ZERO, UnitVec3::Y).unwrap();
        assert_eq!(q, Quaternion::IDENTITY);
        let q = look_at(Vec3::new(0.0, 0.0, -5.0), Vec3::ZERO, UnitVec3::Y).unwrap();
        assert_eq!(q, Quaternion::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(
            look_at(Vec3::new(0.0, 5.0, 0.0), Vec3::ZERO, UnitVec3::Y),
            Err(GeomError::DegenerateLookAt)
        );
    }

    #[test]
    fn look_at_keeps_up_in_the_vertical_plane() {
        let pos = Vec3::new(3.0, 1.0, -4.0);
        let q = look_at(pos, Vec3::ZERO, UnitVec3::Y).unwrap();
        let up = q.rotate(CAMERA_UP);
        let right = q.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert!(right.y.abs() < 1e-12, "camera roll introduced: {right}");
        assert!(up.y > 0.0);
    }

    #[test]
    fn normalization_is_identity_on_unit_quaternions() {
        let q = Quaternion::new(-0.0544, -0.307, 0.9355, 0.16599);
        let n = q.normalized().unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-12);
        assert_eq!(n.normalized().unwrap(), n);
        assert!(Quaternion::new(0.0, 0.0, 0.0, 0.0).normalized().is_err());
    }

    proptest::proptest! {
        #[test]
        fn line_is_orthogonal_to_both_normals(
            a in proptest::array::uniform3(-1.0f64..1.0), b in proptest::array::uniform3(-1.0f64..1.0),
            pa in proptest::array::uniform3(-0.5f64..0.5), pb in proptest::array::uniform3(-0.5f64..0.5),
        ) {
            let (Ok(na), Ok(nb)) = (Vec3::from(a).normalized(), Vec3::from(b).normalized()) else { return Ok(()) };
            let pa = Plane::new(pa.into(), na);
            let pb = Plane::new(pb.into(), nb);
            if let LineIntersection::Line(l) = plane_plane_line(&pa, &pb, 1e-6) {
                proptest::prop_assert!(l.direction.dot(*na).abs() < 1e-9);
                proptest::prop_assert!(l.direction.dot(*nb).abs() < 1e-9);
                proptest::prop_assert!(pa.signed_distance(l.point).abs() < 1e-9);
                proptest::prop_assert!(pb.signed_distance(l.point).abs() < 1e-9);
            }
        }

        #[test]
        fn look_at_aims_at_target(p in proptest::array::uniform3(-1.0f64..1.0)) {
            let Ok(dir) = Vec3::from(p).normalized() else { return Ok(()) };
            let pos = *dir * 5.0;
            let up = if dir.cross(*UnitVec3::Y).norm() > 1e-6 { UnitVec3::Y } else { UnitVec3::Z };
            let q = look_at(pos, Vec3::ZERO, up).unwrap();
            proptest::prop_assert!((q.norm() - 1.0).abs() < 1e-9);
            let fwd = q.rotate(CAMERA_FORWARD);
            proptest::prop_assert!(fwd.dot(-*dir) > 1.0 - 1e-9);
        }
    }
}
