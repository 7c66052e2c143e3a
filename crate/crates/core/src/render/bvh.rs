//! Bounding-volume hierarchy over scene triangles.

use crate::geom::Vec3;
use crate::mesh::TriMesh;

use super::Ray;

/// Barycentric slack so rays through shared edges do not slip between triangles.
const EDGE_SLACK: f64 = 1e-10;
const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub a: Vec3,
    pub b: Vec3,
    pub c: Vec3,
    /// Unit geometric normal, `(b - a) × (c - a)` direction.
    pub normal: Vec3,
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3) -> Option<Triangle> {
        let n = (b - a).cross(c - a);
        let len = n.norm();
        (len > 0.0 && len.is_finite()).then(|| Triangle { a, b, c, normal: n / len })
    }

    fn centroid(&self) -> Vec3 {
        (self.a + self.b + self.c) / 3.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
}

/// Möller–Trumbore. Returns the ray parameter of a hit in `(0, t_max)`.
pub fn intersect_triangle(ray: &Ray, tri: &Triangle, t_max: f64) -> Option<f64> {
    let d = *ray.direction;
    let e1 = tri.b - tri.a;
    let e2 = tri.c - tri.a;
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri.a;
    let u = s.dot(p) * inv;
    if !(-EDGE_SLACK..=1.0 + EDGE_SLACK).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = d.dot(q) * inv;
    if v < -EDGE_SLACK || u + v > 1.0 + EDGE_SLACK {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 0.0 && t < t_max).then_some(t)
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Aabb {
        Aabb { lo: Vec3::splat(f64::INFINITY), hi: Vec3::splat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: Vec3) {
        self.lo = self.lo.min(p);
        self.hi = self.hi.max(p);
    }

    /// Slab test; entry distance when the box is hit before `t_max`.
    fn hit(&self, origin: Vec3, inv_dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.lo[k] - origin[k]) * inv_dir[k];
            let b = (self.hi[k] - origin[k]) * inv_dir[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            // NaN from 0 * inf means the ray lies in the slab plane: keep the bounds.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 * (1.0 + 4.0 * f64::EPSILON) {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Triangles are numbered in mesh order; hits at equal distance resolve to
/// the lower number, so results do not depend on traversal order.
#[derive(Clone, Debug)]
pub struct Bvh {
    triangles: Vec<Triangle>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build<'a, I>(meshes: I) -> Bvh
    where
        I: IntoIterator<Item = &'a TriMesh>,
    {
        let mut triangles = Vec::new();
        for mesh in meshes {
            for t in &mesh.triangles {
                if let Some(tri) = Triangle::new(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) {
                    triangles.push(tri);
                }
            }
        }
        let mut bvh = Bvh { order: (0..triangles.len()).collect(), triangles, nodes: Vec::new() };
        if !bvh.triangles.is_empty() {
            bvh.split(0, bvh.triangles.len());
        }
        bvh
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> &Triangle {
        &self.triangles[i]
    }

    fn split(&mut self, start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut centroids = Aabb::empty();
        for &i in &self.order[start..end] {
            let t = &self.triangles[i];
            for p in [t.a, t.b, t.c] {
                bounds.grow(p);
            }
            centroids.grow(t.centroid());
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { bounds, start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let extent = centroids.hi - centroids.lo;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let tris = &self.triangles;
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            tris[a].centroid()[axis].total_cmp(&tris[b].centroid()[axis]).then(a.cmp(&b))
        });
        let left = self.split(start, mid);
        let right = self.split(mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Nearest hit before `t_max`.
    pub fn intersect(&self, ray: &Ray, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z);
        let mut best: Option<Hit> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let limit = best.map_or(t_max, |h| h.t);
            // Inclusive bound: an equal-distance hit with a lower index must still be found.
            if self.nodes[n].bounds().hit(ray.origin, inv, limit * (1.0 + 1e-12) + 1e-300).is_none() {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for &i in &self.order[start..end] {
                        if let Some(t) = intersect_triangle(ray, &self.triangles[i], t_max) {
                            let better = match best {
                                None => true,
                                Some(h) => t < h.t || (t == h.t && i < h.triangle),
                            };
                            if better {
                                best = Some(Hit { t, triangle: i });
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }

    /// Any hit before `t_max`.
    pub fn occluded(&self, ray: &Ray, t_max: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = Vec3::new(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.nodes[n].bounds().hit(ray.origin, inv, t_max).is_none() {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    if self.order[start..end]
                        .iter()
                        .any(|&i| intersect_triangle(ray, &self.triangles[i], t_max).is_some())
                    {
                        return true;
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        false
    }
}
