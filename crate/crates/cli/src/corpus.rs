//! Scene corpus described by a JSON manifest.
//!
//! ```json
//! {
//!   "width": 1024,
//!   "height": 512,
//!   "scenes": [
//!     {"id": "bedroom_01", "panorama": "pano/bedroom_01.png", "annotations": "ann/bedroom_01.json"}
//!   ]
//! }
//! ```
//!
//! Relative paths are resolved against the manifest's directory. `width` and
//! `height` default to 1024 × 512 and every panorama must match them.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use spv_core::experiment::{Annotations, ExperimentError, SceneSource};
use spv_core::geometry::Panorama;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("corpus has problems:\n{}", .0.join("\n"))]
    Scenes(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub panorama: PathBuf,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
}

fn default_width() -> u32 {
    1024
}

fn default_height() -> u32 {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    pub scenes: Vec<SceneEntry>,
}

/// A validated manifest. Panoramas are decoded on first use and cached.
#[derive(Debug)]
pub struct Corpus {
    manifest: CorpusManifest,
    root: PathBuf,
    annotations: HashMap<String, Annotations>,
    panoramas: Mutex<HashMap<String, Arc<Panorama>>>,
}

impl Corpus {
    /// Reads and checks a manifest: unique ids, existing files, parseable
    /// annotations. Every problem is reported, one line per scene.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let err = |msg: String| CorpusError::Manifest {
            path: path.to_owned(),
            msg,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let manifest: CorpusManifest = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let root = path.parent().map(Path::to_owned).unwrap_or_default();
        Self::from_manifest(manifest, root)
    }

    pub fn from_manifest(manifest: CorpusManifest, root: PathBuf) -> Result<Self, CorpusError> {
        let mut problems = Vec::new();
        let mut annotations = HashMap::new();
        if manifest.width == 0 || manifest.height == 0 {
            problems.push(format!("panorama size {}x{} is empty", manifest.width, manifest.height));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &manifest.scenes {
            if !seen.insert(s.id.as_str()) {
                problems.push(format!("{}: duplicate scene id", s.id));
            }
            let pano = root.join(&s.panorama);
            if !pano.is_file() {
                problems.push(format!("{}: panorama {} not found", s.id, pano.display()));
            }
            if let Some(a) = &s.annotations {
                match Annotations::load(root.join(a)) {
                    Ok(ann) => {
                        annotations.insert(s.id.clone(), ann);
                    }
                    Err(e) => problems.push(format!("{}: {e}", s.id)),
                }
            }
        }
        if manifest.scenes.is_empty() {
            problems.push("no scenes".into());
        }
        if !problems.is_empty() {
            return Err(CorpusError::Scenes(problems));
        }
        Ok(Self {
            manifest,
            root,
            annotations,
            panoramas: Mutex::new(HashMap::new()),
        })
    }

    pub fn manifest(&self) -> &CorpusManifest {
        &self.manifest
    }

    /// Scene ids in manifest order.
    pub fn scene_ids(&self) -> Vec<String> {
        self.manifest.scenes.iter().map(|s| s.id.clone()).collect()
    }

    fn decode(&self, scene: &str) -> Result<Panorama, ExperimentError> {
        let entry = self
            .manifest
            .scenes
            .iter()
            .find(|s| s.id == scene)
            .ok_or_else(|| ExperimentError::Scene(format!("unknown scene {scene:?}")))?;
        let p = Panorama::load(self.root.join(&entry.panorama))
            .map_err(|e| ExperimentError::Scene(format!("{scene}: {e}")))?;
        if (p.width(), p.height()) != (self.manifest.width, self.manifest.height) {
            return Err(ExperimentError::Scene(format!(
                "{scene}: panorama is {}x{}, manifest says {}x{}",
                p.width(),
                p.height(),
                self.manifest.width,
                self.manifest.height
            )));
        }
        Ok(p)
    }
}

impl SceneSource for Corpus {
    fn panorama(&self, scene: &str) -> Result<Arc<Panorama>, ExperimentError> {
        if let Some(p) = self.panoramas.lock().expect("panorama cache poisoned").get(scene) {
            return Ok(p.clone());
        }
        // decode outside the lock; a duplicate decode under contention is harmless
        let p = Arc::new(self.decode(scene)?);
        self.panoramas
            .lock()
            .expect("panorama cache poisoned")
            .entry(scene.to_owned())
            .or_insert(p.clone());
        Ok(p)
    }

    fn annotations(&self, scene: &str) -> Option<Annotations> {
        self.annotations.get(scene).cloned()
    }
}
