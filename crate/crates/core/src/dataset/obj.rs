//! Wavefront OBJ subset: `v`, `f`, `o` and comments.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::TriMesh;
use crate::scenegen::{Scene, SceneSource};

/// Imported geometry must fit in this cube.
pub const SCENE_BOUND: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: vertex {vertex:?} outside [-{SCENE_BOUND}, {SCENE_BOUND}]^3")]
    Bounds { line: usize, vertex: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjWarning {
    /// Object mesh is not a closed, consistently oriented surface.
    NonManifold { object: usize, name: String },
}

impl std::fmt::Display for ObjWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjWarning::NonManifold { object, name } => write!(f, "object {object} ({name}) is not a closed mesh"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjImport {
    pub scene: Scene,
    pub warnings: Vec<ObjWarning>,
}

fn push_coord(out: &mut String, x: f64) {
    let s = format!("{x:.6}");
    out.push_str(if s == "-0.000000" { "0.000000" } else { &s });
}

/// Objects in order, each with its vertices in creation order; face indices
/// are global and 1-based.
pub fn export_obj(scene: &Scene) -> String {
    let mut out = String::new();
    out.push_str("# polyscene scene\n");
    let _ = writeln!(out, "# objects {}", scene.objects.len());
    let mut base = 1;
    for (i, mesh) in scene.meshes().enumerate() {
        let _ = writeln!(out, "o object_{i}");
        for v in &mesh.vertices {
            out.push('v');
            for c in [v.x, v.y, v.z] {
                out.push(' ');
                push_coord(&mut out, c);
            }
            out.push('\n');
        }
        for t in &mesh.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base);
        }
        base += mesh.vertices.len();
    }
    out
}

/// Hex digest prefix used as the id of an imported scene.
pub fn content_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..16].iter().map(|b| format!("{b:02x}")).collect()
}

struct Group {
    name: String,
    faces: Vec<[usize; 3]>,
}

/// Parses an OBJ file. Objects come from `o` records; a file without any is
/// split into connected components. Texture coordinates, normals, materials
/// and smoothing groups are ignored.
pub fn import_obj(bytes: &[u8], filename: &str) -> Result<ObjImport, ObjError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ObjError::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        reason: "invalid UTF-8".into(),
    })?;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut groups: Vec<Group> = Vec::new();
    let mut saw_object = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: String| ObjError::Parse { line, reason };
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad coordinate {t:?}"))))
                    .collect::<Result<_, _>>()?;
                if !(3..=4).contains(&coords.len()) {
                    return Err(err(format!("vertex needs 3 coordinates, got {}", coords.len())));
                }
                let v = Vec3::new(coords[0], coords[1], coords[2]);
                if !v.is_finite() {
                    return Err(err("non-finite coordinate".into()));
                }
                if [v.x, v.y, v.z].iter().any(|c| c.abs() > SCENE_BOUND) {
                    return Err(ObjError::Bounds { line, vertex: v.to_array() });
                }
                vertices.push(v);
            }
            "f" => {
                let ids: Vec<usize> = tokens
                    .map(|t| resolve_index(t, vertices.len()).map_err(&err))
                    .collect::<Result<_, _>>()?;
                if ids.len() < 3 {
                    return Err(err(format!("face needs at least 3 vertices, got {}", ids.len())));
                }
                if groups.is_empty() {
                    groups.push(Group { name: "default".into(), faces: Vec::new() });
                }
                let g = groups.last_mut().expect("group exists");
                for i in 1..ids.len() - 1 {
                    g.faces.push([ids[0], ids[i], ids[i + 1]]);
                }
            }
            "o" => {
                saw_object = true;
                let name = tokens.collect::<Vec<_>>().join(" ");
                groups.push(Group { name, faces: Vec::new() });
            }
            "vt" | "vn" | "vp" | "mtllib" | "usemtl" | "s" | "g" | "l" | "p" => {}
            other => return Err(err(format!("unknown record {other:?}"))),
        }
    }

    let mut named: Vec<(String, TriMesh)> = Vec::new();
    for g in groups.into_iter().filter(|g| !g.faces.is_empty()) {
        let mesh = group_mesh(&vertices, &g.faces);
        if saw_object {
            named.push((g.name, mesh));
        } else {
            named.extend(mesh.connected_components().into_iter().map(|m| (String::new(), m)));
        }
    }
    let warnings = named
        .iter()
        .enumerate()
        .filter(|(_, (_, m))| !m.is_closed())
        .map(|(i, (name, _))| ObjWarning::NonManifold { object: i, name: name.clone() })
        .collect();
    let scene = Scene::from_meshes(
        content_id(bytes),
        named.into_iter().map(|(_, m)| m).collect(),
        SceneSource::Imported { filename: filename.to_string() },
    );
    Ok(ObjImport { scene, warnings })
}

/// First slash-separated field of a face token as a 0-based index.
fn resolve_index(token: &str, count: usize) -> Result<usize, String> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head.parse().map_err(|_| format!("bad vertex index {token:?}"))?;
    let resolved = match i {
        0 => return Err("vertex index 0".into()),
        i if i > 0 => i - 1,
        i => count as i64 + i,
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(format!("vertex index {i} out of range (have {count} vertices)"));
    }
    Ok(resolved as usize)
}

/// Referenced vertices in file order, re-indexed locally.
fn group_mesh(vertices: &[Vec3], faces: &[[usize; 3]]) -> TriMesh {
    let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let local = |v: usize| used.binary_search(&v).expect("vertex is used");
    TriMesh {
        vertices: used.iter().map(|&v| vertices[v]).collect(),
        triangles: faces.iter().map(|t| [local(t[0]), local(t[1]), local(t[2])]).collect(),
    }
}

/// The scene as it reads back from its own OBJ export. Id, source and
/// parameters are kept; only the object meshes change.
pub fn canonical_scene(scene: &Scene) -> Scene {
    let text = export_obj(scene);
    let imported = import_obj(text.as_bytes(), "").expect("exported OBJ parses").scene;
    let mut out = scene.clone();
    for (obj, mesh) in out.objects.iter_mut().zip(imported.objects) {
        obj.mesh = mesh.mesh;
    }
    out
}
