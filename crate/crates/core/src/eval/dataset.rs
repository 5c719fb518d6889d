//! Evaluation datasets.
//!
//! A dataset file is a JSON object with a `task` and a list of `records`.
//! Image references are either paths (relative to the dataset file) to a
//! PNG/JPEG or to a scene JSON, or an inline `{"scene": {...}}`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{BBox, Image};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Qa,
    Pairqa,
    Tagging,
    Editing,
}

impl Task {
    /// Program input names, in image order.
    pub fn input_names(self) -> &'static [&'static str] {
        match self {
            Task::Pairqa => &["LEFT", "RIGHT"],
            _ => &["IMAGE"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Qa => "qa",
            Task::Pairqa => "pairqa",
            Task::Tagging => "tagging",
            Task::Editing => "editing",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qa" => Ok(Task::Qa),
            "pairqa" => Ok(Task::Pairqa),
            "tagging" => Ok(Task::Tagging),
            "editing" => Ok(Task::Editing),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageRef {
    Path(String),
    Inline { scene: Scene },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldObject {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub images: Vec<ImageRef>,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<GoldObject>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub task: Task,
    pub records: Vec<EvalRecord>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("record {id}: {message}")]
    Record { id: String, message: String },
    #[error("record id {0} appears twice")]
    DuplicateId(String),
}

fn record_err(id: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::Record { id: id.to_string(), message: message.into() }
}

impl Dataset {
    pub fn from_json(s: &str) -> Result<Dataset, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Structural checks that need no images.
    pub fn check(&self) -> Result<(), DatasetError> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
            if let Some(t) = r.task {
                if t != self.task {
                    return Err(record_err(&r.id, format!("task {t} in a {} dataset", self.task)));
                }
            }
            let want = self.task.input_names().len();
            if r.images.len() != want {
                return Err(record_err(&r.id, format!("{} images, expected {want}", r.images.len())));
            }
            match self.task {
                Task::Qa | Task::Pairqa if r.answer.is_none() => return Err(record_err(&r.id, "missing answer")),
                Task::Tagging if r.objects.is_none() => return Err(record_err(&r.id, "missing gold objects")),
                _ => {}
            }
        }
        Ok(())
    }
}

/// A dataset with every image decoded or rendered.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub images: Vec<Vec<Arc<Image>>>,
}

fn load_ref(r: &ImageRef, base: &Path, id: &str) -> Result<Image, DatasetError> {
    match r {
        ImageRef::Inline { scene } => scene.render().map_err(|e| record_err(id, e)),
        ImageRef::Path(p) => {
            let path: PathBuf = base.join(p);
            let bytes = std::fs::read(&path)
                .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                let text = String::from_utf8_lossy(&bytes);
                let scene = Scene::from_json(&text)
                    .map_err(|source| DatasetError::Json { path: path.display().to_string(), source })?;
                scene.render().map_err(|e| record_err(id, e))
            } else {
                Image::decode(&bytes).map_err(|e| record_err(id, format!("{}: {e}", path.display())))
            }
        }
    }
}

impl LoadedDataset {
    /// Resolves image paths against `base`.
    pub fn resolve(dataset: Dataset, base: &Path) -> Result<LoadedDataset, DatasetError> {
        dataset.check()?;
        let mut images = Vec::with_capacity(dataset.records.len());
        for r in &dataset.records {
            let imgs = r
                .images
                .iter()
                .map(|i| load_ref(i, base, &r.id).map(Arc::new))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(objs) = &r.objects {
                let (w, h) = (imgs[0].width() as f64, imgs[0].height() as f64);
                for o in objs {
                    let b = &o.bbox;
                    if !b.is_valid() || b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > w || b.y2 > h {
                        return Err(record_err(&r.id, format!("gold box {:?} outside the {w}x{h} image", <[f64; 4]>::from(*b))));
                    }
                }
            }
            images.push(imgs);
        }
        Ok(LoadedDataset { dataset, images })
    }

    pub fn load(path: &Path) -> Result<LoadedDataset, DatasetError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
        let dataset =
            Dataset::from_json(&text).map_err(|source| DatasetError::Json { path: path.display().to_string(), source })?;
        LoadedDataset::resolve(dataset, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn task(&self) -> Task {
        self.dataset.task
    }

    pub fn len(&self) -> usize {
        self.dataset.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.records.is_empty()
    }

    /// Keeps only the records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LoadedDataset {
        LoadedDataset {
            dataset: Dataset {
                task: self.dataset.task,
                records: indices.iter().map(|&i| self.dataset.records[i].clone()).collect(),
            },
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
        }
    }
}

/// Up to `k` record indices per question type, drawn with `seed`.
/// Records without a type form one group. Output is in dataset order.
pub fn stratified_sample(records: &[EvalRecord], k: usize, seed: u64) -> Vec<usize> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.question_type.as_deref().unwrap_or("")).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for members in groups.values() {
        let take = k.min(members.len());
        out.extend(rand::seq::index::sample(&mut rng, members.len(), take).into_iter().map(|j| members[j]));
    }
    out.sort_unstable();
    out
}
