//! Dataset jobs: per-view renders with JSON annotations, a manifest, and a
//! reproducible zip archive.
//!
//! Output layout for a scene `S` and `n` views:
//!
//! ```text
//! S.obj
//! S_00000.png  S_00000.json
//! ...
//! manifest.json        (written last)
//! ```

mod obj;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GeomError, Quaternion, RngStream, Vec3};
use crate::render::{
    sample_camera_pose, CameraIntrinsics, CameraPose, LightingConfig, LightingMode, RayCaster, Renderer,
    CAMERA_RADIUS,
};
use crate::scenegen::{Scene, SceneSource, UserParams, VIEW_STREAM};

pub use obj::{canonical_scene, content_id, export_obj, import_obj, ObjError, ObjImport, ObjWarning, SCENE_BOUND};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("no manifest in {0}")]
    MissingManifest(PathBuf),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("num_views must be >= 1")]
    NoViews,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Translation plus unit quaternion `(qw, qx, qy, qz)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

impl Transform {
    pub const IDENTITY: Transform = Transform { translation: [0.0; 3], rotation: [1.0, 0.0, 0.0, 0.0] };

    pub fn from_pose(pose: &CameraPose) -> Self {
        Self { translation: pose.position.to_array(), rotation: pose.orientation.to_array() }
    }

    pub fn to_pose(&self) -> Result<CameraPose, GeomError> {
        let [qw, qx, qy, qz] = self.rotation;
        Ok(CameraPose {
            position: Vec3::from(self.translation),
            orientation: Quaternion::new(qw, qx, qy, qz).normalized()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub num_planes: usize,
    pub prob_intersection: f64,
    pub attempts: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub schema_version: u32,
    pub scene_id: String,
    pub view_index: usize,
    pub user_params: UserParams,
    /// Absent for imported scenes.
    pub generator_params: Option<GeneratorParams>,
    pub object_transform: Transform,
    pub camera_transform: Transform,
    pub intrinsics: CameraIntrinsics,
    pub image_file: String,
}

impl Annotation {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("annotation serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug)]
pub struct DatasetJob {
    pub scene: Scene,
    pub num_views: usize,
    pub lighting: LightingMode,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub view_index: usize,
    pub image_file: String,
    pub annotation_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewFailure {
    pub view_index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scene_id: String,
    pub scene_file: String,
    pub seed: u64,
    pub lighting: LightingMode,
    pub num_views: usize,
    pub views: Vec<ViewEntry>,
    pub failures: Vec<ViewFailure>,
}

impl Manifest {
    /// Every file the manifest accounts for, itself included, sorted.
    pub fn files(&self) -> Vec<String> {
        let mut files = vec![self.scene_file.clone(), MANIFEST_FILE.to_string()];
        for v in &self.views {
            files.push(v.image_file.clone());
            files.push(v.annotation_file.clone());
        }
        files.sort();
        files
    }

    pub fn read(dir: &Path) -> Result<Manifest, DatasetError> {
        let path = dir.join(MANIFEST_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(DatasetError::MissingManifest(dir.into())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))
    }
}

pub fn view_stem(scene_id: &str, view_index: usize) -> String {
    format!("{scene_id}_{view_index:05}")
}

/// Camera pose of view `i`; depends only on the seed and the index.
pub fn view_pose(seed: u64, view_index: usize) -> Result<CameraPose, GeomError> {
    let mut rng = RngStream::with_stream(seed, VIEW_STREAM + view_index as u64);
    sample_camera_pose(&mut rng, CAMERA_RADIUS)
}

pub fn run_dataset_job(job: &DatasetJob) -> Result<Manifest, DatasetError> {
    run_dataset_job_with(job, &RayCaster::default())
}

/// Views render in parallel; files are written in view order, manifest last.
/// A view that fails is recorded in the manifest and the job carries on.
pub fn run_dataset_job_with(job: &DatasetJob, renderer: &dyn Renderer) -> Result<Manifest, DatasetError> {
    if job.num_views == 0 {
        return Err(DatasetError::NoViews);
    }
    let dir = &job.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let scene = canonical_scene(&job.scene);
    let scene_file = format!("{}.obj", scene.id);
    write_file(&dir.join(&scene_file), export_obj(&scene).as_bytes())?;

    let lighting = LightingConfig::new(job.lighting);
    let generator_params = match &scene.source {
        SceneSource::Generated { params, seed, attempts } => Some(GeneratorParams {
            num_planes: params.num_planes,
            prob_intersection: params.prob_intersection,
            attempts: *attempts,
            seed: *seed,
        }),
        SceneSource::Imported { .. } => None,
    };
    let mut user_params = scene.user_params;
    user_params.lighting = job.lighting;
    user_params.num_views = job.num_views;

    let rendered: Vec<Result<(CameraPose, Vec<u8>), String>> = (0..job.num_views)
        .into_par_iter()
        .map(|i| {
            let pose = view_pose(job.seed, i).map_err(|e| e.to_string())?;
            let image = renderer.render(&scene, &pose, &lighting, &job.intrinsics).map_err(|e| e.to_string())?;
            Ok((pose, image.encode_png()))
        })
        .collect();

    let mut views = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in rendered.into_iter().enumerate() {
        let (pose, png) = match outcome {
            Ok(v) => v,
            Err(reason) => {
                failures.push(ViewFailure { view_index: i, reason });
                continue;
            }
        };
        let stem = view_stem(&scene.id, i);
        let image_file = format!("{stem}.png");
        let annotation_file = format!("{stem}.json");
        let annotation = Annotation {
            schema_version: SCHEMA_VERSION,
            scene_id: scene.id.clone(),
            view_index: i,
            user_params,
            generator_params: generator_params.clone(),
            object_transform: Transform::IDENTITY,
            camera_transform: Transform::from_pose(&pose),
            intrinsics: job.intrinsics,
            image_file: image_file.clone(),
        };
        write_file(&dir.join(&image_file), &png)?;
        write_file(&dir.join(&annotation_file), annotation.to_json().as_bytes())?;
        views.push(ViewEntry { view_index: i, image_file, annotation_file });
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        scene_id: scene.id.clone(),
        scene_file,
        seed: job.seed,
        lighting: job.lighting,
        num_views: job.num_views,
        views,
        failures,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Zips the manifest's files in sorted order with fixed timestamps and
/// permissions, so equal directories give equal archives.
pub fn package_dataset(dir: &Path, archive: &Path) -> Result<Manifest, DatasetError> {
    let manifest = Manifest::read(dir)?;
    let file = fs::File::create(archive).map_err(io_err(archive))?;
    let mut zip = zip::ZipWriter::new(io::BufWriter::new(file));
    let options = zip::write::SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    let zip_err = |e: zip::result::ZipError| DatasetError::Io { path: archive.to_path_buf(), source: io::Error::other(e) };
    for name in manifest.files() {
        let path = dir.join(&name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        zip.start_file(name.as_str(), options).map_err(zip_err)?;
        zip.write_all(&bytes).map_err(io_err(archive))?;
    }
    let mut inner = zip.finish().map_err(zip_err)?;
    inner.flush().map_err(io_err(archive))?;
    Ok(manifest)
}

/// Default archive location next to the dataset directory.
pub fn archive_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.parent().unwrap_or(Path::new(".")).join(format!("{scene_id}.zip"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_zero_padded() {
        assert_eq!(view_stem("abc", 7), "abc_00007");
    }

    #[test]
    fn view_poses_are_reproducible_and_distinct() {
        let a = view_pose(7, 0).unwrap();
        assert_eq!(a, view_pose(7, 0).unwrap());
        assert_ne!(a, view_pose(7, 1).unwrap());
        assert!((a.position.norm() - CAMERA_RADIUS).abs() < 1e-9);
    }

    #[test]
    fn transform_roundtrip_is_exact() {
        let pose = view_pose(3, 2).unwrap();
        assert_eq!(Transform::from_pose(&pose).to_pose().unwrap(), pose);
        let json = serde_json::to_string(&Transform::from_pose(&pose)).unwrap();
        let back: Transform = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_pose().unwrap(), pose);
    }

    #[test]
    fn files_lists_manifest_itself() {
        let m = Manifest {
            schema_version: 1,
            scene_id: "s".into(),
            scene_file: "s.obj".into(),
            seed: 0,
            lighting: LightingMode::Homogeneous,
            num_views: 1,
            views: vec![ViewEntry { view_index: 0, image_file: "s_00000.png".into(), annotation_file: "s_00000.json".into() }],
            failures: vec![],
        };
        assert_eq!(m.files(), vec!["manifest.json", "s.obj", "s_00000.json", "s_00000.png"]);
    }
}
