//! Arrangements of planes and their convex cells.
//!
//! Cells are built by incremental half-space splitting. Construction starts from
//! an axis-aligned clipping box large enough to contain every vertex of the
//! arrangement and inserts the planes one at a time, splitting every cell the
//! plane crosses. Each cell records one [`Side`] per plane, so the sign vector
//! identifies it uniquely.
//!
//! Unbounded cells come out truncated by the clipping box; their faces on the box
//! carry a `plane_index` at or beyond `planes().len()`. A cell is flagged
//! `bounded` only when it has no box faces and every vertex lies strictly inside
//! the unit ball.
//!
//! Vertex coordinates are recomputed from the three planes that support them
//! rather than interpolated along edges, so the same arrangement vertex has
//! identical coordinates in every cell that contains it.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::geom::{three_plane_point, Plane, PointIntersection, UnitVec3, Vec3};

/// Cells thinner than this are not usable as solids.
pub const SLIVER_VOLUME: f64 = 1e-9;
/// Cells with an edge shorter than this are not usable as solids.
pub const SLIVER_EDGE: f64 = 1e-6;

const MAX_BOX_HALF_SIZE: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrangementError {
    #[error("an arrangement needs at least one plane")]
    NoPlanes,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("{degenerate} of {total} plane triples are degenerate")]
    DegenerateArrangement { degenerate: usize, total: usize },
    #[error("cell is not bounded")]
    NotBounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Neg,
    Pos,
}

impl Side {
    pub fn of(signed_distance: f64) -> Side {
        if signed_distance > 0.0 {
            Side::Pos
        } else {
            Side::Neg
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Neg => Side::Pos,
            Side::Pos => Side::Neg,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Side::Neg => '-',
            Side::Pos => '+',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub plane_index: usize,
    /// Counter-clockwise when seen from outside the cell.
    pub vertex_indices: Vec<usize>,
    pub normal: UnitVec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub sign_vector: Vec<Side>,
    pub vertices: Vec<Vec3>,
    pub faces: Vec<Face>,
    pub bounded: bool,
}

impl Cell {
    /// Undirected edges as sorted vertex-index pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| {
                let n = f.vertex_indices.len();
                (0..n).map(move |i| {
                    let (a, b) = (f.vertex_indices[i], f.vertex_indices[(i + 1) % n]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.vertices.iter().fold(Vec3::ZERO, |acc, &v| acc + v);
        sum / self.vertices.len() as f64
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges()
            .into_iter()
            .map(|(a, b)| self.vertices[a].distance(self.vertices[b]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest distance of a face vertex from the plane of that face.
    pub fn max_face_deviation(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| {
                let anchor = self.vertices[f.vertex_indices[0]];
                f.vertex_indices
                    .iter()
                    .map(move |&i| f.normal.dot(self.vertices[i] - anchor).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Volume or slivery edges too small to be a usable solid.
    pub fn is_sliver(&self) -> bool {
        match cell_volume(self) {
            Ok(v) => v < SLIVER_VOLUME || self.min_edge_length() < SLIVER_EDGE,
            Err(_) => true,
        }
    }
}

/// Face shared by two adjacent bounded cells.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedFace {
    pub plane_index: usize,
    pub area: f64,
    pub vertices: Vec<Vec3>,
}

/// Bounded-cell adjacency keyed by `(i, j)` cell indices with `i < j`.
pub type Adjacency = BTreeMap<(usize, usize), SharedFace>;

#[derive(Clone, Debug)]
pub struct Arrangement {
    planes: Vec<Plane>,
    tol: f64,
    box_half_size: f64,
    candidate_vertices: Vec<Vec3>,
    cells: Vec<Cell>,
    index: HashMap<Vec<Side>, usize>,
    adjacency: Adjacency,
}

impl Arrangement {
    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Half-size of the box that truncates unbounded cells.
    pub fn box_half_size(&self) -> f64 {
        self.box_half_size
    }

    /// Non-degenerate triple intersection points inside the unit ball.
    pub fn candidate_vertices(&self) -> &[Vec3] {
        &self.candidate_vertices
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    /// Sign vector of `p`, or `None` if `p` lies within tolerance of a plane.
    pub fn sign_vector_of(&self, p: Vec3) -> Option<Vec<Side>> {
        self.planes
            .iter()
            .map(|pl| {
                let d = pl.signed_distance(p);
                (d.abs() > self.tol).then(|| Side::of(d))
            })
            .collect()
    }

    /// Index of the cell with the given sign vector.
    pub fn cell_index(&self, signs: &[Side]) -> Option<usize> {
        self.index.get(signs).copied()
    }

    /// Index of the cell containing `p` in its interior.
    pub fn locate(&self, p: Vec3) -> Option<usize> {
        self.sign_vector_of(p).and_then(|s| self.cell_index(&s))
    }

    /// Indices of the bounded cells, in cell order.
    pub fn bounded_indices(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.cells[i].bounded).collect()
    }
}

pub fn bounded_cells(arr: &Arrangement) -> Vec<&Cell> {
    arr.cells.iter().filter(|c| c.bounded).collect()
}

pub fn cell_adjacency(arr: &Arrangement) -> &Adjacency {
    &arr.adjacency
}

/// `true` iff `p` is on the inner side of every face plane, within `tol`.
pub fn point_in_cell_with_tol(cell: &Cell, p: Vec3, tol: f64) -> bool {
    cell.faces.iter().all(|f| {
        let anchor = cell.vertices[f.vertex_indices[0]];
        f.normal.dot(p - anchor) <= tol
    })
}

pub fn point_in_cell(cell: &Cell, p: Vec3) -> bool {
    point_in_cell_with_tol(cell, p, crate::geom::EPS)
}

/// Volume by the divergence theorem over fan-triangulated faces.
pub fn cell_volume(cell: &Cell) -> Result<f64, ArrangementError> {
    if !cell.bounded {
        return Err(ArrangementError::NotBounded);
    }
    let origin = cell.centroid();
    let six_v: f64 = cell
        .faces
        .iter()
        .map(|f| {
            let v0 = cell.vertices[f.vertex_indices[0]] - origin;
            f.vertex_indices
                .windows(2)
                .skip(1)
                .map(|w| {
                    let a = cell.vertices[w[0]] - origin;
                    let b = cell.vertices[w[1]] - origin;
                    v0.dot(a.cross(b))
                })
                .sum::<f64>()
        })
        .sum();
    Ok((six_v / 6.0).max(0.0))
}

/// Area of a planar polygon with unit normal `n`.
pub(crate) fn polygon_area(points: &[Vec3], n: Vec3) -> f64 {
    let mut acc = Vec3::ZERO;
    for i in 0..points.len() {
        acc += points[i].cross(points[(i + 1) % points.len()]);
    }
    0.5 * acc.dot(n).abs()
}

pub fn build_arrangement(planes: &[Plane], tol: f64) -> Result<Arrangement, ArrangementError> {
    if planes.is_empty() {
        return Err(ArrangementError::NoPlanes);
    }
    if !(tol > 0.0) {
        return Err(ArrangementError::InvalidTolerance(tol));
    }
    let n = planes.len();

    let mut candidate_vertices = Vec::new();
    let mut max_norm: f64 = 1.0;
    let (mut total, mut degenerate) = (0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                total += 1;
                match three_plane_point(&planes[i], &planes[j], &planes[k], tol) {
                    PointIntersection::Point(p) => {
                        let r = p.norm();
                        if r <= 1.0 {
                            candidate_vertices.push(p);
                        }
                        max_norm = max_norm.max(r);
                    }
                    PointIntersection::Degenerate => {
                        // Triples with a parallel pair simply never meet; only
                        // pencils of mutually transversal planes count.
                        let transversal = |a: &Plane, b: &Plane| a.normal.cross(*b.normal).norm() > tol;
                        if transversal(&planes[i], &planes[j])
                            && transversal(&planes[j], &planes[k])
                            && transversal(&planes[i], &planes[k])
                        {
                            degenerate += 1;
                        }
                    }
                }
            }
        }
    }
    if total > 0 && 2 * degenerate > total {
        return Err(ArrangementError::DegenerateArrangement { degenerate, total });
    }

    let box_half_size = (2.0 * max_norm + 1.0).min(MAX_BOX_HALF_SIZE);
    let mut support_planes = planes.to_vec();
    for axis in 0..3 {
        let normal = [UnitVec3::X, UnitVec3::Y, UnitVec3::Z][axis];
        support_planes.push(Plane::from_offset(normal, -box_half_size));
        support_planes.push(Plane::from_offset(normal, box_half_size));
    }

    let mut polys = vec![Poly::clipping_box(n, box_half_size)];
    for k in 0..n {
        let mut next = Vec::with_capacity(polys.len() * 2);
        for poly in polys {
            poly.split(k, &support_planes, tol, &mut next);
        }
        polys = next;
    }

    let cells: Vec<Cell> = polys.into_iter().map(|p| p.into_cell(n)).collect();
    let index: HashMap<Vec<Side>, usize> =
        cells.iter().enumerate().map(|(i, c)| (c.sign_vector.clone(), i)).collect();
    let adjacency = compute_adjacency(&cells, &index, n, tol);

    Ok(Arrangement { planes: planes.to_vec(), tol, box_half_size, candidate_vertices, cells, index, adjacency })
}

fn compute_adjacency(cells: &[Cell], index: &HashMap<Vec<Side>, usize>, n: usize, tol: f64) -> Adjacency {
    let mut adjacency = Adjacency::new();
    for (i, cell) in cells.iter().enumerate().filter(|(_, c)| c.bounded) {
        for face in cell.faces.iter().filter(|f| f.plane_index < n) {
            let mut flipped = cell.sign_vector.clone();
            flipped[face.plane_index] = flipped[face.plane_index].flip();
            let Some(&j) = index.get(&flipped) else { continue };
            if j <= i || !cells[j].bounded {
                continue;
            }
            let vertices: Vec<Vec3> = face.vertex_indices.iter().map(|&v| cell.vertices[v]).collect();
            let area = polygon_area(&vertices, *face.normal);
            if area > tol * tol {
                adjacency.insert((i, j), SharedFace { plane_index: face.plane_index, area, vertices });
            }
        }
    }
    adjacency
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Neg,
    Zero,
    Pos,
}

#[derive(Clone, Debug)]
struct PolyVertex {
    pos: Vec3,
    /// Sorted indices of the support planes through this vertex.
    support: Vec<usize>,
}

#[derive(Clone, Debug)]
struct PolyFace {
    support: usize,
    outward: Vec3,
    cycle: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Poly {
    vertices: Vec<PolyVertex>,
    faces: Vec<PolyFace>,
    signs: Vec<Side>,
}

impl Poly {
    /// Box `[-h, h]^3`; box planes are numbered from `first_box_plane`
    /// as `-x, +x, -y, +y, -z, +z`.
    fn clipping_box(first_box_plane: usize, h: f64) -> Poly {
        let mut vertices = Vec::with_capacity(8);
        for bits in 0..8usize {
            let coord = |axis: usize| if bits >> axis & 1 == 1 { h } else { -h };
            let pos = Vec3::new(coord(0), coord(1), coord(2));
            let support: Vec<usize> = (0..3).map(|axis| first_box_plane + 2 * axis + (bits >> axis & 1)).collect();
            vertices.push(PolyVertex { pos, support });
        }
        let mut faces = Vec::with_capacity(6);
        for axis in 0..3 {
            for hi in 0..2usize {
                let mut outward = Vec3::ZERO;
                outward = match axis {
                    0 => Vec3 { x: 1.0, ..outward },
                    1 => Vec3 { y: 1.0, ..outward },
                    _ => Vec3 { z: 1.0, ..outward },
                };
                if hi == 0 {
                    outward = -outward;
                }
                let members: Vec<usize> = (0..8).filter(|b| b >> axis & 1 == hi).collect();
                let cycle = order_ccw(&members, &vertices, outward);
                faces.push(PolyFace { support: first_box_plane + 2 * axis + hi, outward, cycle });
            }
        }
        Poly { vertices, faces, signs: Vec::new() }
    }

    fn split(mut self, k: usize, support_planes: &[Plane], tol: f64, out: &mut Vec<Poly>) {
        let plane = &support_planes[k];
        let dist: Vec<f64> = self.vertices.iter().map(|v| plane.signed_distance(v.pos)).collect();
        let class: Vec<Class> = dist
            .iter()
            .map(|&d| {
                if d > tol {
                    Class::Pos
                } else if d < -tol {
                    Class::Neg
                } else {
                    Class::Zero
                }
            })
            .collect();
        for (v, c) in self.vertices.iter_mut().zip(&class) {
            if *c == Class::Zero {
                insert_sorted(&mut v.support, k);
            }
        }
        let has_pos = class.contains(&Class::Pos);
        let has_neg = class.contains(&Class::Neg);
        if !has_neg || !has_pos {
            self.signs.push(if has_pos { Side::Pos } else { Side::Neg });
            out.push(self);
            return;
        }

        let mut vertices = self.vertices;
        let mut class = class;
        let mut edge_points: HashMap<(usize, usize), usize> = HashMap::new();
        let mut pos_faces = Vec::new();
        let mut neg_faces = Vec::new();
        for face in &self.faces {
            let mut pos_cycle = Vec::new();
            let mut neg_cycle = Vec::new();
            let m = face.cycle.len();
            for i in 0..m {
                let a = face.cycle[i];
                let b = face.cycle[(i + 1) % m];
                if class[a] != Class::Neg {
                    pos_cycle.push(a);
                }
                if class[a] != Class::Pos {
                    neg_cycle.push(a);
                }
                let crosses = matches!((class[a], class[b]), (Class::Pos, Class::Neg) | (Class::Neg, Class::Pos));
                if crosses {
                    let key = (a.min(b), a.max(b));
                    let id = *edge_points.entry(key).or_insert_with(|| {
                        let v = edge_vertex(&vertices[a], &vertices[b], dist[a], dist[b], k, support_planes);
                        vertices.push(v);
                        class.push(Class::Zero);
                        vertices.len() - 1
                    });
                    pos_cycle.push(id);
                    neg_cycle.push(id);
                }
            }
            if pos_cycle.len() >= 3 {
                pos_faces.push(PolyFace { cycle: pos_cycle, ..face.clone() });
            }
            if neg_cycle.len() >= 3 {
                neg_faces.push(PolyFace { cycle: neg_cycle, ..face.clone() });
            }
        }

        let normal = *plane.normal;
        for (mut faces, side, outward) in [(pos_faces, Side::Pos, -normal), (neg_faces, Side::Neg, normal)] {
            let mut on_plane: Vec<usize> = faces
                .iter()
                .flat_map(|f| f.cycle.iter().copied())
                .filter(|&v| class[v] == Class::Zero)
                .collect();
            on_plane.sort_unstable();
            on_plane.dedup();
            if on_plane.len() >= 3 {
                let cycle = order_ccw(&on_plane, &vertices, outward);
                faces.push(PolyFace { support: k, outward, cycle });
            }
            let mut signs = self.signs.clone();
            signs.push(side);
            out.push(compact(&vertices, faces, signs));
        }
    }

    fn into_cell(self, n: usize) -> Cell {
        let vertices: Vec<Vec3> = self.vertices.iter().map(|v| v.pos).collect();
        let truncated = self.faces.iter().any(|f| f.support >= n);
        let inside = vertices.iter().all(|v| v.norm() < 1.0);
        let faces = self
            .faces
            .into_iter()
            .map(|f| Face {
                plane_index: f.support,
                vertex_indices: f.cycle,
                normal: UnitVec3::new(f.outward).expect("face normals are unit"),
            })
            .collect();
        Cell { sign_vector: self.signs, vertices, faces, bounded: !truncated && inside }
    }
}

fn insert_sorted(v: &mut Vec<usize>, k: usize) {
    if let Err(pos) = v.binary_search(&k) {
        v.insert(pos, k);
    }
}

/// New vertex where plane `k` crosses the edge `a`–`b`.
fn edge_vertex(a: &PolyVertex, b: &PolyVertex, da: f64, db: f64, k: usize, planes: &[Plane]) -> PolyVertex {
    let common: Vec<usize> = a.support.iter().copied().filter(|s| b.support.binary_search(s).is_ok()).collect();
    let mut support = common.clone();
    insert_sorted(&mut support, k);
    for (x, &i) in common.iter().enumerate() {
        for &j in &common[x + 1..] {
            if let PointIntersection::Point(pos) = three_plane_point(&planes[i], &planes[j], &planes[k], 1e-12) {
                return PolyVertex { pos, support };
            }
        }
    }
    let t = da / (da - db);
    PolyVertex { pos: a.pos + (b.pos - a.pos) * t, support }
}

/// Orders coplanar vertices counter-clockwise around `outward`.
fn order_ccw(ids: &[usize], vertices: &[PolyVertex], outward: Vec3) -> Vec<usize> {
    let centre = ids.iter().fold(Vec3::ZERO, |acc, &i| acc + vertices[i].pos) / ids.len() as f64;
    let helper = if outward.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let u = outward.cross(helper);
    let u = u / u.norm();
    let w = outward.cross(u);
    let mut keyed: Vec<(f64, usize)> = ids
        .iter()
        .map(|&i| {
            let d = vertices[i].pos - centre;
            (d.dot(w).atan2(d.dot(u)), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

fn compact(vertices: &[PolyVertex], mut faces: Vec<PolyFace>, signs: Vec<Side>) -> Poly {
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut kept = Vec::new();
    for face in &mut faces {
        for id in &mut face.cycle {
            *id = *remap.entry(*id).or_insert_with(|| {
                kept.push(vertices[*id].clone());
                kept.len() - 1
            });
        }
    }
    Poly { vertices: kept, faces, signs }
}
