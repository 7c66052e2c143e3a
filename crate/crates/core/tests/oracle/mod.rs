//! Brute-force oracles that share no code path with the arrangement builder.
#![allow(dead_code)]

use std::collections::BTreeSet;

use polyscene_core::geom::{sample_point_in_ball, sample_unit_direction, Plane, RngStream, Vec3};

/// `n` planes drawn with the generator's recipe: anchor uniform in the ball,
/// normal uniform on the sphere.
pub fn random_planes(seed: u64, n: usize) -> Vec<Plane> {
    let mut rng = RngStream::new(seed);
    (0..n)
        .map(|_| {
            let p = sample_point_in_ball(&mut rng).unwrap();
            Plane::new(p, sample_unit_direction(&mut rng))
        })
        .collect()
}

fn normal(p: &Plane) -> [f64; 3] {
    [p.normal.x, p.normal.y, p.normal.z]
}

fn offset(p: &Plane) -> f64 {
    let n = normal(p);
    n[0] * p.point.x + n[1] * p.point.y + n[2] * p.point.z
}

fn eval(p: &Plane, x: [f64; 3]) -> f64 {
    let n = normal(p);
    n[0] * x[0] + n[1] * x[1] + n[2] * x[2] - offset(p)
}

/// Gaussian elimination with partial pivoting; `None` when a pivot falls below `tol`.
pub fn solve_gauss(mut a: [[f64; 4]; 3], tol: f64) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < tol {
            return None;
        }
        a.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

pub struct OracleVertex {
    pub pos: [f64; 3],
    pub planes: [usize; 3],
}

pub fn vertices(planes: &[Plane]) -> Vec<OracleVertex> {
    let n = planes.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let row = |p: &Plane| {
                    let m = normal(p);
                    [m[0], m[1], m[2], offset(p)]
                };
                if let Some(pos) = solve_gauss([row(&planes[i]), row(&planes[j]), row(&planes[k])], 1e-7) {
                    out.push(OracleVertex { pos, planes: [i, j, k] });
                }
            }
        }
    }
    out
}

pub type Signs = Vec<bool>;

/// Sign vector of `x` (`true` = positive side); `None` within `tol` of a plane.
pub fn signs_of(planes: &[Plane], x: [f64; 3], tol: f64) -> Option<Signs> {
    planes
        .iter()
        .map(|p| {
            let d = eval(p, x);
            (d.abs() > tol).then_some(d > 0.0)
        })
        .collect()
}

/// Every region incident to an arrangement vertex, by sign vector.
pub fn regions(planes: &[Plane]) -> BTreeSet<Signs> {
    let mut out = BTreeSet::new();
    for v in vertices(planes) {
        let base: Vec<Option<bool>> = planes
            .iter()
            .enumerate()
            .map(|(i, p)| if v.planes.contains(&i) { None } else { Some(eval(p, v.pos) > 0.0) })
            .collect();
        for combo in 0..8u32 {
            let mut s = Vec::with_capacity(planes.len());
            let mut bit = 0;
            for b in &base {
                s.push(match b {
                    Some(x) => *x,
                    None => {
                        bit += 1;
                        combo >> (bit - 1) & 1 == 1
                    }
                });
            }
            out.insert(s);
        }
    }
    out
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// A region is bounded iff its recession cone is trivial. Candidate extreme
/// rays are the cross products of plane-normal pairs.
pub fn recession_trivial(planes: &[Plane], s: &Signs) -> bool {
    let n = planes.len();
    let mut rank_three = false;
    for i in 0..n {
        for j in i + 1..n {
            let d = cross(normal(&planes[i]), normal(&planes[j]));
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if len < 1e-9 {
                continue;
            }
            let d = [d[0] / len, d[1] / len, d[2] / len];
            for dir in [d, [-d[0], -d[1], -d[2]]] {
                let inside = planes.iter().zip(s).all(|(p, &pos)| {
                    let m = normal(p);
                    let v = m[0] * dir[0] + m[1] * dir[1] + m[2] * dir[2];
                    if pos { v >= -1e-12 } else { v <= 1e-12 }
                });
                if inside {
                    return false;
                }
            }
            for k in 0..n {
                let m = normal(&planes[k]);
                if (m[0] * d[0] + m[1] * d[1] + m[2] * d[2]).abs() > 1e-9 {
                    rank_three = true;
                }
            }
        }
    }
    rank_three
}

/// Arrangement vertices in the closure of region `s`.
pub fn region_vertices(planes: &[Plane], s: &Signs, verts: &[OracleVertex], tol: f64) -> Vec<[f64; 3]> {
    verts
        .iter()
        .filter(|v| {
            planes.iter().zip(s).all(|(p, &pos)| {
                let d = eval(p, v.pos);
                d.abs() <= tol || (d > 0.0) == pos
            })
        })
        .map(|v| v.pos)
        .collect()
}

/// Sign vectors of the regions that are bounded with every vertex strictly inside the unit ball.
pub fn bounded_regions(planes: &[Plane]) -> BTreeSet<Signs> {
    let verts = vertices(planes);
    regions(planes)
        .into_iter()
        .filter(|s| recession_trivial(planes, s))
        .filter(|s| {
            let vs = region_vertices(planes, s, &verts, 1e-9);
            !vs.is_empty() && vs.iter().all(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() < 1.0)
        })
        .collect()
}

/// Membership by sign vector only.
pub fn in_region(planes: &[Plane], s: &Signs, x: Vec3) -> bool {
    planes.iter().zip(s).all(|(p, &pos)| {
        let d = eval(p, [x.x, x.y, x.z]);
        if pos { d > 0.0 } else { d < 0.0 }
    })
}

/// Monte-Carlo volume of region `s` inside the box `[lo, hi]`: (estimate, standard error).
pub fn mc_volume(planes: &[Plane], s: &Signs, lo: Vec3, hi: Vec3, samples: usize, seed: u64) -> (f64, f64) {
    use polyscene_core::geom::UniformSource;
    let mut rng = RngStream::new(seed);
    let ext = hi - lo;
    let box_vol = ext.x * ext.y * ext.z;
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = Vec3::new(
            lo.x + ext.x * rng.next_unit(),
            lo.y + ext.y * rng.next_unit(),
            lo.z + ext.z * rng.next_unit(),
        );
        if in_region(planes, s, x) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (box_vol * p, box_vol * (p * (1.0 - p) / samples as f64).sqrt())
}
