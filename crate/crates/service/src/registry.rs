//! Disk-backed scene registry.
//!
//! Each scene lives in `<data_dir>/scenes/<id>/` as `scene.obj` plus
//! `record.json`. Entries are written to a temporary directory and renamed
//! into place, so readers never see half a record.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use polyscene_core::dataset::{export_obj, import_obj, ObjError};
use polyscene_core::scenegen::{Scene, SceneSource, UserParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SCENE_FILE: &str = "scene.obj";
const RECORD_FILE: &str = "record.json";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid scene id {0:?}")]
    InvalidId(String),
    #[error("scene {id} is corrupt: {reason}")]
    Corrupt { id: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io { path: path.to_path_buf(), source }
}

/// Everything about a scene that the OBJ file does not carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub scene_id: String,
    pub source: SceneSource,
    pub user_params: UserParams,
    pub num_objects: usize,
}

#[derive(Debug)]
pub struct SceneRegistry {
    root: PathBuf,
    cache: RwLock<HashMap<String, Arc<Scene>>>,
}

/// Ids are path components: ASCII alphanumerics, `-` and `_` only.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn random_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl SceneRegistry {
    pub fn open(data_dir: &Path) -> Result<Self, RegistryError> {
        let root = data_dir.join("scenes");
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root, cache: RwLock::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stores the scene under a fresh random id.
    pub fn register_scene(&self, scene: &Scene) -> Result<String, RegistryError> {
        loop {
            let id = random_id();
            if !self.root.join(&id).exists() {
                self.store(&id, scene)?;
                return Ok(id);
            }
        }
    }

    /// Stores the scene under its own id, replacing any previous entry.
    pub fn publish(&self, scene: &Scene) -> Result<String, RegistryError> {
        self.store(&scene.id, scene)?;
        Ok(scene.id.clone())
    }

    fn store(&self, id: &str, scene: &Scene) -> Result<(), RegistryError> {
        if !valid_id(id) {
            return Err(RegistryError::InvalidId(id.to_string()));
        }
        let record = SceneRecord {
            id: id.to_string(),
            scene_id: scene.id.clone(),
            source: scene.source.clone(),
            user_params: scene.user_params,
            num_objects: scene.objects.len(),
        };
        let tmp = self.root.join(format!(".tmp-{}", random_id()));
        fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
        let write = |name: &str, bytes: &[u8]| {
            let p = tmp.join(name);
            fs::write(&p, bytes).map_err(io_err(&p))
        };
        write(SCENE_FILE, export_obj(scene).as_bytes())?;
        let mut json = serde_json::to_string_pretty(&record).expect("record serializes");
        json.push('\n');
        write(RECORD_FILE, json.as_bytes())?;
        let dest = self.root.join(id);
        if dest.exists() {
            fs::remove_dir_all(&dest).map_err(io_err(&dest))?;
        }
        fs::rename(&tmp, &dest).map_err(io_err(&dest))?;
        self.cache.write().expect("registry lock").remove(id);
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        valid_id(id) && self.root.join(id).join(RECORD_FILE).is_file()
    }

    /// Scene stored under `id`; `Ok(None)` for unknown ids.
    pub fn get(&self, id: &str) -> Result<Option<Arc<Scene>>, RegistryError> {
        if !valid_id(id) {
            return Ok(None);
        }
        if let Some(s) = self.cache.read().expect("registry lock").get(id) {
            return Ok(Some(s.clone()));
        }
        let dir = self.root.join(id);
        let record_path = dir.join(RECORD_FILE);
        let record_text = match fs::read_to_string(&record_path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&record_path)(e)),
        };
        let corrupt = |reason: String| RegistryError::Corrupt { id: id.to_string(), reason };
        let record: SceneRecord = serde_json::from_str(&record_text).map_err(|e| corrupt(e.to_string()))?;
        let obj_path = dir.join(SCENE_FILE);
        let bytes = fs::read(&obj_path).map_err(io_err(&obj_path))?;
        let imported = import_obj(&bytes, SCENE_FILE).map_err(|e: ObjError| corrupt(e.to_string()))?;
        if imported.scene.objects.len() != record.num_objects {
            return Err(corrupt(format!(
                "record lists {} objects, OBJ has {}",
                record.num_objects,
                imported.scene.objects.len()
            )));
        }
        let scene = Arc::new(Scene {
            id: record.scene_id,
            objects: imported.scene.objects,
            source: record.source,
            user_params: record.user_params,
        });
        self.cache.write().expect("registry lock").insert(id.to_string(), scene.clone());
        Ok(Some(scene))
    }

    /// Stored OBJ text for `id`.
    pub fn obj_text(&self, id: &str) -> Result<Option<String>, RegistryError> {
        if !self.contains(id) {
            return Ok(None);
        }
        let p = self.root.join(id).join(SCENE_FILE);
        fs::read_to_string(&p).map(Some).map_err(io_err(&p))
    }

    pub fn ids(&self) -> Result<Vec<String>, RegistryError> {
        let mut ids: Vec<String> = fs::read_dir(&self.root)
            .map_err(io_err(&self.root))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| valid_id(n) && self.contains(n))
            .collect();
        ids.sort();
        Ok(ids)
    }
}
