//! Scene synthesis: user parameters in, a scene with the requested number of
//! objects out.
//!
//! One attempt samples planes, builds their arrangement, makes each usable
//! bounded cell solid with probability `prob_intersection`, and groups the solid
//! cells into objects according to the requested [`Layout`]. Attempts repeat
//! with fresh sub-streams of the seed until the object count and layout match.
//!
//! Layouts
//! - `Separate`: one object per solid cell; no two solid cells may share a face,
//!   an edge or a vertex.
//! - `Touching`: one object per solid cell; contact is allowed.
//! - `Intersecting`: face-connected solid cells merge into one (possibly
//!   non-convex) object whose boundary drops the interior faces.

mod calibration;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::{build_arrangement, Adjacency, Arrangement, ArrangementError, Cell};
use crate::geom::{sample_point_in_ball, sample_unit_direction, GeomError, Plane, RngStream, UniformSource, EPS};
use crate::mesh::TriMesh;
use crate::render::LightingMode;

pub use calibration::{calibrate, CalibrationEntry, CalibrationSweep, CalibrationTable, GridPoint};

/// Largest object count the generator accepts.
pub const MAX_OBJECTS: usize = 200;
pub const MIN_PLANES: usize = 4;
pub const MAX_PLANES: usize = 200;
pub const DEFAULT_MAX_ATTEMPTS: usize = 100;

/// Stream ids; each purpose draws from its own ChaCha stream of the seed.
pub const PLANE_STREAM: u64 = 1 << 40;
pub const VIEW_STREAM: u64 = 2 << 40;
const ID_STREAM: u64 = 3 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Separate,
    Touching,
    Intersecting,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Separate, Layout::Touching, Layout::Intersecting];

    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Separate => "separate",
            Layout::Touching => "touching",
            Layout::Intersecting => "intersecting",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layout {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "separate" => Ok(Layout::Separate),
            "touching" => Ok(Layout::Touching),
            "intersecting" => Ok(Layout::Intersecting),
            other => Err(SceneError::InvalidParams(format!("unknown layout {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserParams {
    pub num_objects: usize,
    pub layout: Layout,
    pub lighting: LightingMode,
    pub num_views: usize,
}

impl UserParams {
    pub fn new(num_objects: usize, layout: Layout, lighting: LightingMode, num_views: usize) -> Result<Self, SceneError> {
        let p = Self { num_objects, layout, lighting, num_views };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.num_objects < 1 {
            return Err(SceneError::InvalidParams("num_objects must be >= 1".into()));
        }
        if self.num_views < 1 {
            return Err(SceneError::InvalidParams("num_views must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub num_planes: usize,
    pub prob_intersection: f64,
    pub max_attempts: usize,
}

impl GenParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(MIN_PLANES..=MAX_PLANES).contains(&self.num_planes) {
            return Err(SceneError::InvalidParams(format!(
                "num_planes must be in [{MIN_PLANES}, {MAX_PLANES}], got {}",
                self.num_planes
            )));
        }
        if !(0.0..=1.0).contains(&self.prob_intersection) {
            return Err(SceneError::InvalidParams(format!(
                "prob_intersection must be in [0, 1], got {}",
                self.prob_intersection
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SceneSource {
    /// `params` are the values of the accepted attempt.
    Generated { params: GenParams, seed: u64, attempts: usize },
    Imported { filename: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    /// Arrangement indices of the cells forming this object; empty for imported meshes.
    pub cell_ids: Vec<usize>,
    pub cells: Vec<Cell>,
    pub mesh: TriMesh,
}

impl SceneObject {
    pub fn from_mesh(mesh: TriMesh) -> Self {
        Self { cell_ids: Vec::new(), cells: Vec::new(), mesh }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub id: String,
    pub objects: Vec<SceneObject>,
    pub source: SceneSource,
    pub user_params: UserParams,
}

impl Scene {
    /// Scene built from ready-made meshes, one object each. User parameters
    /// record the object count; the layout is not inferred.
    pub fn from_meshes(id: impl Into<String>, meshes: Vec<TriMesh>, source: SceneSource) -> Scene {
        Scene {
            id: id.into(),
            user_params: UserParams {
                num_objects: meshes.len(),
                layout: Layout::Separate,
                lighting: LightingMode::FixedSpotlight,
                num_views: 1,
            },
            objects: meshes.into_iter().map(SceneObject::from_mesh).collect(),
            source,
        }
    }

    pub fn meshes(&self) -> impl Iterator<Item = &TriMesh> {
        self.objects.iter().map(|o| &o.mesh)
    }

    pub fn triangle_count(&self) -> usize {
        self.meshes().map(|m| m.triangles.len()).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{requested} objects requested; at most {cap} are supported")]
    Unsatisfiable { requested: usize, cap: usize },
    #[error("no acceptable scene after {attempts} attempts (closest object count: {closest:?}, requested {requested})")]
    GenerationExhausted { attempts: usize, closest: Option<usize>, requested: usize },
    #[error(transparent)]
    Arrangement(#[from] ArrangementError),
    #[error(transparent)]
    Sampling(#[from] GeomError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutViolation {
    #[error("solid cells {0} and {1} are in contact")]
    Contact(usize, usize),
    #[error("merged object {0} does not have a two-manifold boundary")]
    NonManifold(usize),
}

/// Initial generator parameters for a user request, from the calibration table.
pub fn convert_params(user: &UserParams) -> Result<GenParams, SceneError> {
    user.validate()?;
    if user.num_objects > MAX_OBJECTS {
        return Err(SceneError::Unsatisfiable { requested: user.num_objects, cap: MAX_OBJECTS });
    }
    let (num_planes, prob_intersection) = CalibrationTable::builtin().lookup(user.num_objects, user.layout);
    Ok(GenParams { num_planes, prob_intersection, max_attempts: DEFAULT_MAX_ATTEMPTS })
}

/// Anchor uniform in the unit ball, normal uniform on the sphere.
pub fn sample_planes<R: UniformSource + ?Sized>(rng: &mut R, count: usize) -> Result<Vec<Plane>, GeomError> {
    (0..count)
        .map(|_| {
            let point = sample_point_in_ball(rng)?;
            Ok(Plane::new(point, sample_unit_direction(rng)))
        })
        .collect()
}

/// Bounded cells that are not slivers.
pub fn usable_cells(arr: &Arrangement) -> Vec<usize> {
    arr.bounded_indices().into_iter().filter(|&i| !arr.cells()[i].is_sliver()).collect()
}

/// Independent Bernoulli(`p`) draw per candidate; always consumes one uniform each.
pub fn select_solids<R: UniformSource + ?Sized>(candidates: &[usize], p: f64, rng: &mut R) -> Vec<usize> {
    candidates.iter().copied().filter(|_| rng.next_unit() < p).collect()
}

/// Whether two cells share a face (per `adjacency`) or any vertex.
pub fn cells_touch(a: (usize, &Cell), b: (usize, &Cell), adjacency: &Adjacency) -> bool {
    let key = (a.0.min(b.0), a.0.max(b.0));
    adjacency.contains_key(&key)
        || a.1.vertices.iter().any(|&u| b.1.vertices.iter().any(|&v| u.distance(v) <= 1e-9))
}

pub fn assemble_objects(arr: &Arrangement, solids: &[usize], layout: Layout) -> Result<Vec<SceneObject>, LayoutViolation> {
    let cells = arr.cells();
    let single = |i: usize| SceneObject { cell_ids: vec![i], cells: vec![cells[i].clone()], mesh: TriMesh::from_cell(&cells[i]) };
    match layout {
        Layout::Touching => Ok(solids.iter().map(|&i| single(i)).collect()),
        Layout::Separate => {
            for (x, &a) in solids.iter().enumerate() {
                for &b in &solids[x + 1..] {
                    if cells_touch((a, &cells[a]), (b, &cells[b]), arr.adjacency()) {
                        return Err(LayoutViolation::Contact(a, b));
                    }
                }
            }
            Ok(solids.iter().map(|&i| single(i)).collect())
        }
        Layout::Intersecting => {
            let components = face_components(solids, arr.adjacency());
            components
                .into_iter()
                .enumerate()
                .map(|(k, members)| {
                    if members.len() == 1 {
                        return Ok(single(members[0]));
                    }
                    let mesh = merged_boundary(arr, &members);
                    if !mesh.is_closed() {
                        return Err(LayoutViolation::NonManifold(k));
                    }
                    Ok(SceneObject {
                        cells: members.iter().map(|&i| cells[i].clone()).collect(),
                        cell_ids: members,
                        mesh,
                    })
                })
                .collect()
        }
    }
}

/// Groups of solids connected through shared faces, ordered by smallest member.
fn face_components(solids: &[usize], adjacency: &Adjacency) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..solids.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for x in 0..solids.len() {
        for y in x + 1..solids.len() {
            let key = (solids[x].min(solids[y]), solids[x].max(solids[y]));
            if adjacency.contains_key(&key) {
                let (a, b) = (find(&mut parent, x), find(&mut parent, y));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; solids.len()];
    let mut order: Vec<usize> = (0..solids.len()).collect();
    order.sort_by_key(|&x| solids[x]);
    for x in order {
        let root = find(&mut parent, x);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(solids[x]);
    }
    groups
}

/// Boundary of a union of face-adjacent cells: every face except those shared
/// between two members.
fn merged_boundary(arr: &Arrangement, members: &[usize]) -> TriMesh {
    let cells = arr.cells();
    let polygons = members.iter().flat_map(|&i| {
        let cell = &cells[i];
        cell.faces
            .iter()
            .filter(move |f| {
                let mut flipped = cell.sign_vector.clone();
                if f.plane_index >= flipped.len() {
                    return true;
                }
                flipped[f.plane_index] = flipped[f.plane_index].flip();
                match arr.cell_index(&flipped) {
                    Some(j) => !members.contains(&j) || !arr.adjacency().contains_key(&(i.min(j), i.max(j))),
                    None => true,
                }
            })
            .map(move |f| f.vertex_indices.iter().map(|&v| cell.vertices[v]).collect::<Vec<_>>())
    });
    TriMesh::from_polygons(polygons)
}

pub fn classify_layout(objects: &[SceneObject], adjacency: &Adjacency) -> Layout {
    if objects.iter().any(|o| o.cells.len() >= 2) {
        return Layout::Intersecting;
    }
    for (x, a) in objects.iter().enumerate() {
        for b in &objects[x + 1..] {
            let touching = a.cell_ids.iter().zip(&a.cells).any(|ca| {
                b.cell_ids.iter().zip(&b.cells).any(|cb| cells_touch((*ca.0, ca.1), (*cb.0, cb.1), adjacency))
            });
            if touching {
                return Layout::Touching;
            }
        }
    }
    Layout::Separate
}

/// Whether a scene classified as `found` satisfies a request for `wanted` with
/// `num_objects` objects. A single object cannot touch anything, so a one-object
/// touching request is met by a separate scene.
pub fn layout_satisfied(wanted: Layout, found: Layout, num_objects: usize) -> bool {
    found == wanted || (wanted == Layout::Touching && num_objects == 1 && found == Layout::Separate)
}

/// Deterministic 128-bit hex id for a generated scene.
pub fn generated_scene_id(seed: u64, user: &UserParams) -> String {
    let tag = (user.num_objects as u64) << 8 | user.layout as u64;
    let mut rng = RngStream::with_stream(seed, ID_STREAM | tag);
    format!("{:016x}{:016x}", rng.next_u64(), rng.next_u64())
}

/// Everything one attempt produced, for diagnostics and calibration.
pub struct Attempt {
    pub arrangement: Arrangement,
    pub solids: Vec<usize>,
    pub objects: Result<Vec<SceneObject>, LayoutViolation>,
}

pub fn run_attempt(params: &GenParams, layout: Layout, rng: &mut RngStream) -> Result<Attempt, SceneError> {
    let planes = sample_planes(rng, params.num_planes)?;
    let arrangement = build_arrangement(&planes, EPS)?;
    let usable = usable_cells(&arrangement);
    let solids = select_solids(&usable, params.prob_intersection, rng);
    let objects = assemble_objects(&arrangement, &solids, layout);
    Ok(Attempt { arrangement, solids, objects })
}

/// Consecutive misses in one direction before the controller adjusts.
const STREAK: usize = 3;

pub fn generate_scene(user: &UserParams, seed: u64, max_attempts: usize) -> Result<Scene, SceneError> {
    let mut params = convert_params(user)?;
    params.max_attempts = max_attempts;
    params.validate()?;
    let target = user.num_objects;
    let mut closest: Option<usize> = None;
    let (mut over, mut under) = (0usize, 0usize);

    for attempt in 0..max_attempts {
        let mut rng = RngStream::with_stream(seed, PLANE_STREAM + attempt as u64);
        let outcome = match run_attempt(&params, user.layout, &mut rng) {
            Ok(a) => a,
            Err(SceneError::Arrangement(ArrangementError::DegenerateArrangement { .. })) => continue,
            Err(e) => return Err(e),
        };
        let count = match &outcome.objects {
            Ok(objects) => {
                let found = classify_layout(objects, outcome.arrangement.adjacency());
                if objects.len() == target && layout_satisfied(user.layout, found, target) {
                    let Ok(objects) = outcome.objects else { unreachable!() };
                    return Ok(Scene {
                        id: generated_scene_id(seed, user),
                        objects,
                        source: SceneSource::Generated { params, seed, attempts: attempt + 1 },
                        user_params: *user,
                    });
                }
                Some(objects.len())
            }
            Err(_) => None,
        };
        if let Some(c) = count {
            if closest.is_none_or(|best| c.abs_diff(target) < best.abs_diff(target)) {
                closest = Some(c);
            }
        }
        // Contacts between separate solids mean the solids are too dense.
        let overshoot = count.map_or(true, |c| c > target);
        let undershoot = count.is_some_and(|c| c < target);
        over = if overshoot { over + 1 } else { 0 };
        under = if undershoot { under + 1 } else { 0 };
        if over >= STREAK {
            params.prob_intersection *= 0.8;
            over = 0;
        }
        if under >= STREAK {
            params.num_planes = (params.num_planes + 2).min(MAX_PLANES);
            under = 0;
        }
    }
    Err(SceneError::GenerationExhausted { attempts: max_attempts, closest, requested: target })
}
