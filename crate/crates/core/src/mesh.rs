//! Indexed triangle meshes.

use std::collections::HashMap;

use crate::arrangement::Cell;
use crate::geom::Vec3;

/// Vertices closer than this are welded when polygons are stitched together.
pub const WELD_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    /// Counter-clockwise seen from outside.
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Fan-triangulates convex polygons, welding shared corners.
    pub fn from_polygons<I>(polygons: I) -> TriMesh
    where
        I: IntoIterator<Item = Vec<Vec3>>,
    {
        let mut mesh = TriMesh::default();
        for poly in polygons {
            let ids: Vec<usize> = poly.iter().map(|&p| mesh.weld(p)).collect();
            for i in 1..ids.len().saturating_sub(1) {
                mesh.triangles.push([ids[0], ids[i], ids[i + 1]]);
            }
        }
        mesh
    }

    pub fn from_cell(cell: &Cell) -> TriMesh {
        TriMesh::from_polygons(
            cell.faces
                .iter()
                .map(|f| f.vertex_indices.iter().map(|&i| cell.vertices[i]).collect()),
        )
    }

    fn weld(&mut self, p: Vec3) -> usize {
        if let Some(i) = self.vertices.iter().position(|&q| q.distance(p) <= WELD_TOLERANCE) {
            return i;
        }
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Number of triangles using each undirected edge, and whether the two
    /// uses (when there are two) run in opposite directions.
    fn edge_uses(&self) -> HashMap<(usize, usize), (usize, i32)> {
        let mut uses: HashMap<(usize, usize), (usize, i32)> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = uses.entry((a.min(b), a.max(b))).or_default();
                e.0 += 1;
                e.1 += if a < b { 1 } else { -1 };
            }
        }
        uses
    }

    /// Every edge borders exactly two triangles with opposite orientation.
    pub fn is_closed(&self) -> bool {
        !self.triangles.is_empty() && self.edge_uses().values().all(|&(n, dir)| n == 2 && dir == 0)
    }

    /// Signed volume; positive for closed, outward-oriented meshes.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| self.vertices[t[0]].dot(self.vertices[t[1]].cross(self.vertices[t[2]])))
            .sum::<f64>()
            / 6.0
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
    }

    /// Splits into pieces connected through shared vertices, ordered by their
    /// first triangle. Vertex order within each piece follows the original.
    pub fn connected_components(&self) -> Vec<TriMesh> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for t in &self.triangles {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, t[0]), find(&mut parent, t[k]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut order: Vec<usize> = Vec::new();
        let mut groups: HashMap<usize, Vec<[usize; 3]>> = HashMap::new();
        for t in &self.triangles {
            let root = find(&mut parent, t[0]);
            groups
                .entry(root)
                .or_insert_with(|| {
                    order.push(root);
                    Vec::new()
                })
                .push(*t);
        }
        order
            .into_iter()
            .map(|root| {
                let tris = &groups[&root];
                let mut used: Vec<usize> = tris.iter().flatten().copied().collect();
                used.sort_unstable();
                used.dedup();
                let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                TriMesh {
                    vertices: used.iter().map(|&v| self.vertices[v]).collect(),
                    triangles: tris.iter().map(|t| [remap[&t[0]], remap[&t[1]], remap[&t[2]]]).collect(),
                }
            })
            .collect()
    }

    /// Axis-aligned cube `[-h, h]^3`, twelve outward triangles.
    pub fn cube(h: f64) -> TriMesh {
        let c = |x: f64, y: f64, z: f64| Vec3::new(x * h, y * h, z * h);
        let quads = [
            [c(1., -1., -1.), c(1., 1., -1.), c(1., 1., 1.), c(1., -1., 1.)],
            [c(-1., -1., -1.), c(-1., -1., 1.), c(-1., 1., 1.), c(-1., 1., -1.)],
            [c(-1., 1., -1.), c(-1., 1., 1.), c(1., 1., 1.), c(1., 1., -1.)],
            [c(-1., -1., -1.), c(1., -1., -1.), c(1., -1., 1.), c(-1., -1., 1.)],
            [c(-1., -1., 1.), c(1., -1., 1.), c(1., 1., 1.), c(-1., 1., 1.)],
            [c(-1., -1., -1.), c(-1., 1., -1.), c(1., 1., -1.), c(1., -1., -1.)],
        ];
        TriMesh::from_polygons(quads.iter().map(|q| q.to_vec()))
    }

    pub fn translated(mut self, by: Vec3) -> TriMesh {
        for v in &mut self.vertices {
            *v += by;
        }
        self
    }
}
