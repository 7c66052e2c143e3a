//! Random points and directions.

use std::f64::consts::TAU;

use super::{GeomError, UniformSource, UnitVec3, Vec3};

/// Upper bound on rejection-loop iterations.
pub const MAX_REJECTIONS: usize = 1_000_000;

/// Uniform point in the closed unit ball by rejection from the cube `[-1, 1]^3`.
pub fn sample_point_in_ball<R: UniformSource + ?Sized>(rng: &mut R) -> Result<Vec3, GeomError> {
    for _ in 0..MAX_REJECTIONS {
        let p = Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        if p.norm_squared() <= 1.0 {
            return Ok(p);
        }
    }
    Err(GeomError::SamplingExhausted(MAX_REJECTIONS))
}

/// Uniform direction from an azimuth and an arccos-distributed polar angle.
///
/// Consumes two uniforms: the azimuth first, then `u` in `[-1, 1]`.
pub fn sample_unit_direction<R: UniformSource + ?Sized>(rng: &mut R) -> UnitVec3 {
    let phi = rng.uniform(0.0, TAU);
    let u = rng.uniform(-1.0, 1.0).clamp(-1.0, 1.0);
    let theta = u.acos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    UnitVec3::new_unchecked(Vec3::new(st * cp, st * sp, ct))
}

/// Marsaglia (1972): uniform point on the unit sphere from a point in the unit disk.
pub fn marsaglia_sphere_point<R: UniformSource + ?Sized>(rng: &mut R) -> Result<UnitVec3, GeomError> {
    for _ in 0..MAX_REJECTIONS {
        let x1 = rng.uniform(-1.0, 1.0);
        let x2 = rng.uniform(-1.0, 1.0);
        let s = x1 * x1 + x2 * x2;
        if s < 1.0 {
            let r = 2.0 * (1.0 - s).sqrt();
            let v = Vec3::new(x1 * r, x2 * r, 1.0 - 2.0 * s);
            // Exact in real arithmetic; rescale away rounding.
            return Ok(UnitVec3::new_unchecked(v / v.norm()));
        }
    }
    Err(GeomError::SamplingExhausted(MAX_REJECTIONS))
}
