//! Deterministic ray caster.
//!
//! The camera is a pinhole with a 35 mm lens on a 32 mm sensor; the sensor
//! spans the larger image dimension. One primary ray per pixel (optionally
//! 2×2 supersampled), nearest hit over every object triangle, single-bounce
//! shading:
//!
//! - `FixedSpotlight`: one point lamp at `(-4.6, 1.763, -4.493)`, Lambertian
//!   term with inverse-square falloff capped at 1 over the unit cube around
//!   the origin, hard shadow rays. Shadowed surfaces keep only the ambient floor.
//! - `Homogeneous`: mean of six directional lights along `±x`, `±y`, `±z`,
//!   scaled so the best-lit orientation gets the full diffuse term; no
//!   shadow rays.
//!
//! Both modes add an ambient floor of 15% of the material colour
//! (`#BEB3FF`). Pixels with no hit get the mid-grey background.

mod bvh;

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{look_at, marsaglia_sphere_point, GeomError, Quaternion, UniformSource, UnitVec3, Vec3};
use crate::scenegen::Scene;

pub use bvh::{intersect_triangle, Bvh, Hit, Triangle};

pub const DEFAULT_WIDTH: u32 = 1920;
pub const DEFAULT_HEIGHT: u32 = 1080;
/// Camera sphere radius.
pub const CAMERA_RADIUS: f64 = 5.0;
pub const LAMP_POSITION: Vec3 = Vec3::new(-4.6, 1.763, -4.493);
pub const MATERIAL_COLOR: [u8; 3] = [0xBE, 0xB3, 0xFF];
pub const LAMP_COLOR: [u8; 3] = [0xFF, 0xFF, 0xFF];
pub const BACKGROUND_COLOR: [u8; 3] = [128, 128, 128];
pub const AMBIENT: f64 = 0.15;

/// Offset applied to shadow-ray origins along the surface normal.
const SHADOW_BIAS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightingMode {
    FixedSpotlight,
    Homogeneous,
}

impl LightingMode {
    /// Short wire name: `fixed` or `homogeneous`.
    pub fn as_str(self) -> &'static str {
        match self {
            LightingMode::FixedSpotlight => "fixed",
            LightingMode::Homogeneous => "homogeneous",
        }
    }
}

impl fmt::Display for LightingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown lighting {0:?}")]
pub struct UnknownLighting(pub String);

impl FromStr for LightingMode {
    type Err = UnknownLighting;

    /// Accepts `fixed`, `fixed_spotlight`, `homogeneous` and the `homogenous` spelling.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "fixed" | "fixed_spotlight" | "spotlight" => Ok(LightingMode::FixedSpotlight),
            "homogeneous" | "homogenous" => Ok(LightingMode::Homogeneous),
            _ => Err(UnknownLighting(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_length_mm: f64,
    pub sensor_width_mm: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { focal_length_mm: 35.0, sensor_width_mm: 32.0, width: DEFAULT_WIDTH, height: DEFAULT_HEIGHT }
    }
}

impl CameraIntrinsics {
    pub fn with_resolution(width: u32, height: u32) -> Self {
        Self { width, height, ..Self::default() }
    }

    /// Sensor extent (mm) along x and y.
    fn sensor_extent(&self) -> (f64, f64) {
        let (w, h) = (self.width as f64, self.height as f64);
        if w >= h {
            (self.sensor_width_mm, self.sensor_width_mm * h / w)
        } else {
            (self.sensor_width_mm * w / h, self.sensor_width_mm)
        }
    }

    pub fn horizontal_fov(&self) -> f64 {
        2.0 * (self.sensor_extent().0 / (2.0 * self.focal_length_mm)).atan()
    }

    pub fn vertical_fov(&self) -> f64 {
        2.0 * (self.sensor_extent().1 / (2.0 * self.focal_length_mm)).atan()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl CameraPose {
    /// `[x, y, z, qw, qx, qy, qz]`.
    pub fn to_array(&self) -> [f64; 7] {
        let p = self.position;
        let q = self.orientation;
        [p.x, p.y, p.z, q.qw, q.qx, q.qy, q.qz]
    }

    pub fn from_array(a: [f64; 7]) -> Result<Self, GeomError> {
        Ok(Self {
            position: Vec3::new(a[0], a[1], a[2]),
            orientation: Quaternion::new(a[3], a[4], a[5], a[6]).normalized()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightingConfig {
    pub mode: LightingMode,
    pub lamp_position: Vec3,
    pub lamp_color: [u8; 3],
    pub material_color: [u8; 3],
    pub background: [u8; 3],
    pub ambient: f64,
}

impl LightingConfig {
    pub fn new(mode: LightingMode) -> Self {
        Self {
            mode,
            lamp_position: LAMP_POSITION,
            lamp_color: LAMP_COLOR,
            material_color: MATERIAL_COLOR,
            background: BACKGROUND_COLOR,
            ambient: AMBIENT,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RenderOptions {
    pub supersample: bool,
}

/// Row-major RGB8.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

impl Image {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let pixels = color.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, pixels }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_png(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_png<W: io::Write>(&self, w: W) -> io::Result<()> {
        let mut enc = png::Encoder::new(w, self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(io::Error::other)?;
        writer.write_image_data(&self.pixels).map_err(io::Error::other)?;
        writer.finish().map_err(io::Error::other)
    }

    pub fn decode_png(bytes: &[u8]) -> io::Result<Image> {
        let mut reader = png::Decoder::new(io::Cursor::new(bytes)).read_info().map_err(io::Error::other)?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(io::Error::other)?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "expected 8-bit RGB"));
        }
        buf.truncate(info.buffer_size());
        Ok(Image { width: info.width, height: info.height, pixels: buf })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("render failed: {0}")]
pub struct RenderError(pub String);

/// Render backend; the ray caster is the only production implementation.
pub trait Renderer: Send + Sync {
    fn render(
        &self,
        scene: &Scene,
        pose: &CameraPose,
        lighting: &LightingConfig,
        intr: &CameraIntrinsics,
    ) -> Result<Image, RenderError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RayCaster {
    pub options: RenderOptions,
}

impl Renderer for RayCaster {
    fn render(
        &self,
        scene: &Scene,
        pose: &CameraPose,
        lighting: &LightingConfig,
        intr: &CameraIntrinsics,
    ) -> Result<Image, RenderError> {
        if intr.width == 0 || intr.height == 0 {
            return Err(RenderError(format!("empty resolution {}x{}", intr.width, intr.height)));
        }
        Ok(render_with(scene, pose, lighting, intr, self.options))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: UnitVec3,
}

/// Uniform camera position on the sphere of `radius`, aimed at the origin.
/// Positions on the vertical axis use `+z` as the up hint.
pub fn sample_camera_pose<R: UniformSource + ?Sized>(rng: &mut R, radius: f64) -> Result<CameraPose, GeomError> {
    let position = *marsaglia_sphere_point(rng)? * radius;
    let orientation = match look_at(position, Vec3::ZERO, UnitVec3::Y) {
        Err(GeomError::DegenerateLookAt) => look_at(position, Vec3::ZERO, UnitVec3::Z)?,
        other => other?,
    };
    Ok(CameraPose { position, orientation })
}

/// Ray through the centre of pixel `(px, py)`; `py` grows downwards.
pub fn primary_ray(pose: &CameraPose, intr: &CameraIntrinsics, px: f64, py: f64) -> Ray {
    let (sx, sy) = intr.sensor_extent();
    let u = (px + 0.5) / intr.width as f64 - 0.5;
    let v = 0.5 - (py + 0.5) / intr.height as f64;
    let local = Vec3::new(u * sx / intr.focal_length_mm, v * sy / intr.focal_length_mm, -1.0);
    let dir = pose.orientation.rotate(local);
    Ray { origin: pose.position, direction: UnitVec3::new(dir).expect("camera rays are non-zero") }
}

pub fn render(scene: &Scene, pose: &CameraPose, lighting: &LightingConfig, intr: &CameraIntrinsics) -> Image {
    render_with(scene, pose, lighting, intr, RenderOptions::default())
}

pub fn render_with(
    scene: &Scene,
    pose: &CameraPose,
    lighting: &LightingConfig,
    intr: &CameraIntrinsics,
    options: RenderOptions,
) -> Image {
    let bvh = Bvh::build(scene.meshes());
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut pixels = vec![0u8; w * h * 3];
    pixels.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let rgb = if options.supersample {
                let mut acc = [0.0; 3];
                for (dx, dy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                    let ray = primary_ray(pose, intr, x as f64 + dx, y as f64 + dy);
                    let c = shade(&bvh, &ray, lighting);
                    for k in 0..3 {
                        acc[k] += c[k] / 4.0;
                    }
                }
                acc
            } else {
                shade(&bvh, &primary_ray(pose, intr, x as f64, y as f64), lighting)
            };
            for k in 0..3 {
                row[x * 3 + k] = rgb[k].round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    Image { width: intr.width, height: intr.height, pixels }
}

/// Inverse-square falloff, 1 everywhere inside the unit cube at the origin.
fn falloff(lamp: Vec3, dist: f64) -> f64 {
    let reference = lamp.norm() + 0.75f64.sqrt();
    (reference * reference / (dist * dist)).min(1.0)
}

/// Linear colour (0–255 scale) seen along `ray`.
fn shade(bvh: &Bvh, ray: &Ray, lighting: &LightingConfig) -> [f64; 3] {
    let Some(hit) = bvh.intersect(ray, f64::INFINITY) else {
        return lighting.background.map(f64::from);
    };
    let tri = bvh.triangle(hit.triangle);
    let mut n = tri.normal;
    if n.dot(*ray.direction) > 0.0 {
        n = -n;
    }
    let p = ray.origin + *ray.direction * hit.t;
    let diffuse = match lighting.mode {
        LightingMode::FixedSpotlight => {
            let to_lamp = lighting.lamp_position - p;
            let dist = to_lamp.norm();
            let l = to_lamp / dist;
            let lambert = n.dot(l);
            if lambert <= 0.0 {
                0.0
            } else {
                let shadow = Ray { origin: p + n * SHADOW_BIAS, direction: UnitVec3::new(l).expect("unit") };
                if bvh.occluded(&shadow, dist - SHADOW_BIAS) {
                    0.0
                } else {
                    lambert * falloff(lighting.lamp_position, dist)
                }
            }
        }
        // Six-light mean (|nx| + |ny| + |nz|) / 6, scaled so its maximum is 1.
        LightingMode::Homogeneous => (n.x.abs() + n.y.abs() + n.z.abs()) / 3f64.sqrt(),
    };
    let intensity = lighting.ambient + (1.0 - lighting.ambient) * diffuse;
    let lamp = lighting.lamp_color.map(|c| f64::from(c) / 255.0);
    let mut out = [0.0; 3];
    for k in 0..3 {
        let lit = if lighting.mode == LightingMode::FixedSpotlight {
            lighting.ambient + (intensity - lighting.ambient) * lamp[k]
        } else {
            intensity
        };
        out[k] = f64::from(lighting.material_color[k]) * lit;
    }
    out
}
