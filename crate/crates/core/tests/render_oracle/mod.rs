//! Brute-force ray oracles and render fixtures shared by test targets.
#![allow(dead_code)]

use polyscene_core::geom::{look_at, Quaternion, UnitVec3, Vec3};
use polyscene_core::mesh::TriMesh;
use polyscene_core::render::{CameraPose, Image, BACKGROUND_COLOR, MATERIAL_COLOR};
use polyscene_core::scenegen::{Scene, SceneSource};

pub fn scene(meshes: Vec<TriMesh>) -> Scene {
    Scene::from_meshes("fixture", meshes, SceneSource::Imported { filename: "fixture.obj".into() })
}

pub fn front_pose() -> CameraPose {
    CameraPose { position: Vec3::new(0.0, 0.0, 5.0), orientation: Quaternion::IDENTITY }
}

pub fn aimed(position: Vec3) -> CameraPose {
    CameraPose { position, orientation: look_at(position, Vec3::ZERO, UnitVec3::Y).unwrap() }
}

/// Ray/plane intersection followed by edge sign tests.
pub fn oracle_hit(o: Vec3, d: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let n = (b - a).cross(c - a);
    let denom = n.dot(d);
    if denom == 0.0 {
        return None;
    }
    let t = n.dot(a - o) / denom;
    if t <= 0.0 {
        return None;
    }
    let p = o + d * t;
    let s0 = n.dot((b - a).cross(p - a));
    let s1 = n.dot((c - b).cross(p - b));
    let s2 = n.dot((a - c).cross(p - c));
    let tol = -1e-9 * n.norm_squared();
    (s0 >= tol && s1 >= tol && s2 >= tol).then_some(t)
}

/// Nearest hit over every triangle: (t, mesh index).
pub fn oracle_nearest(meshes: &[TriMesh], o: Vec3, d: Vec3) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (mi, m) in meshes.iter().enumerate() {
        for t in &m.triangles {
            if let Some(h) = oracle_hit(o, d, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) {
                if best.is_none_or(|(bt, _)| h < bt) {
                    best = Some((h, mi));
                }
            }
        }
    }
    best
}

/// Slab test against `[lo, hi]`.
pub fn ray_hits_box(o: Vec3, d: Vec3, lo: Vec3, hi: Vec3) -> bool {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return false;
            }
            continue;
        }
        let (a, b) = ((lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    t0 <= t1
}

pub fn luminance_variance(img: &Image) -> f64 {
    let lum: Vec<f64> = img
        .pixels
        .chunks(3)
        .map(|p| 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64)
        .collect();
    let mean = lum.iter().sum::<f64>() / lum.len() as f64;
    lum.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / lum.len() as f64
}

pub fn ambient_color() -> [u8; 3] {
    MATERIAL_COLOR.map(|c| (c as f64 * 0.15).round() as u8)
}

/// Outward normal of the unit cube face containing `p`.
pub fn face_normal(p: Vec3) -> Vec3 {
    let a = [p.x.abs(), p.y.abs(), p.z.abs()];
    let k = (0..3).max_by(|&i, &j| a[i].total_cmp(&a[j])).unwrap();
    let mut n = [0.0; 3];
    n[k] = p[k].signum();
    Vec3::from(n)
}

pub fn ray_hits_segment_box(from: Vec3, to: Vec3, lo: Vec3, hi: Vec3) -> bool {
    let d = to - from;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..3 {
        if d[k] == 0.0 {
            if from[k] < lo[k] || from[k] > hi[k] {
                return false;
            }
            continue;
        }
        let (a, b) = ((lo[k] - from[k]) / d[k], (hi[k] - from[k]) / d[k]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    t0 <= t1
}

/// Latitude/longitude sphere; fine enough that the polygon silhouette stays
/// within 0.1% of the true one.
pub fn uv_sphere(r: f64, stacks: usize, slices: usize) -> TriMesh {
    use std::f64::consts::PI;
    let mut polys = Vec::new();
    let at = |i: usize, j: usize| {
        let th = PI * i as f64 / stacks as f64;
        let ph = 2.0 * PI * j as f64 / slices as f64;
        Vec3::new(r * th.sin() * ph.cos(), r * th.cos(), r * th.sin() * ph.sin())
    };
    for i in 0..stacks {
        for j in 0..slices {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            if i == 0 {
                polys.push(vec![a, c, b]);
            } else if i + 1 == stacks {
                polys.push(vec![a, d, b]);
            } else {
                polys.push(vec![a, d, c, b]);
            }
        }
    }
    TriMesh::from_polygons(polys)
}

pub fn projected_width(img: &Image) -> usize {
    let y = img.height / 2;
    (0..img.width).filter(|&x| img.pixel(x, y) != BACKGROUND_COLOR).count()
}
