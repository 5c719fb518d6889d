//! Run, session and image persistence.
//!
//! Everything but pixels lives in one JSON file mapping keys to values;
//! images are PNG files named by content id. Each change rewrites the file
//! through a temporary sibling and a rename.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use vispipe_core::image::{Image, ImageId};
use vispipe_core::value::ImageSource;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("store file {path} is corrupt: {source}")]
    Corrupt { path: String, source: serde_json::Error },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Data {
    counters: BTreeMap<String, u64>,
    entries: BTreeMap<String, serde_json::Value>,
}

pub struct Store {
    root: Option<PathBuf>,
    data: Mutex<Data>,
    images: Mutex<HashMap<ImageId, Arc<Image>>>,
}

const STATE: &str = "state.json";

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io(path))
}

impl Store {
    pub fn in_memory() -> Self {
        Store { root: None, data: Mutex::new(Data::default()), images: Mutex::new(HashMap::new()) }
    }

    /// Opens (creating if needed) a store directory.
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(root.join("images")).map_err(io(root))?;
        let state = root.join(STATE);
        let data = if state.exists() {
            let text = std::fs::read_to_string(&state).map_err(io(&state))?;
            serde_json::from_str(&text).map_err(|source| StoreError::Corrupt { path: state.display().to_string(), source })?
        } else {
            Data::default()
        };
        Ok(Store { root: Some(root.to_path_buf()), data: Mutex::new(data), images: Mutex::new(HashMap::new()) })
    }

    fn flush(&self, data: &Data) -> Result<(), StoreError> {
        match &self.root {
            Some(root) => {
                let text = serde_json::to_string(data).expect("store data serializes");
                write_atomic(&root.join(STATE), text.as_bytes())
            }
            None => Ok(()),
        }
    }

    pub fn get(&self, key: &str) -> Option<serde_json::Value> {
        self.data.lock().entries.get(key).cloned()
    }

    pub fn put(&self, key: &str, value: serde_json::Value) -> Result<(), StoreError> {
        let mut d = self.data.lock();
        d.entries.insert(key.to_string(), value);
        self.flush(&d)
    }

    /// Sets several keys with a single write.
    pub fn put_all(&self, items: Vec<(String, serde_json::Value)>) -> Result<(), StoreError> {
        let mut d = self.data.lock();
        d.entries.extend(items);
        self.flush(&d)
    }

    /// Increments and returns the named counter (first value 1).
    pub fn next(&self, counter: &str) -> Result<u64, StoreError> {
        let mut d = self.data.lock();
        let n = d.counters.entry(counter.to_string()).or_insert(0);
        *n += 1;
        let n = *n;
        self.flush(&d)?;
        Ok(n)
    }

    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.data.lock().entries.range(prefix.to_string()..).take_while(|(k, _)| k.starts_with(prefix)).map(|(k, _)| k.clone()).collect()
    }

    /// Stores an image under its content id. Storing the same pixels twice
    /// is a no-op that returns the same id.
    pub fn put_image(&self, img: Arc<Image>) -> Result<ImageId, StoreError> {
        let id = img.id();
        let mut images = self.images.lock();
        if images.contains_key(&id) {
            return Ok(id);
        }
        if let Some(root) = &self.root {
            let path = root.join("images").join(format!("{id}.png"));
            if !path.exists() {
                write_atomic(&path, &img.to_png())?;
            }
        }
        images.insert(id.clone(), img);
        Ok(id)
    }

    pub fn image(&self, id: &ImageId) -> Option<Arc<Image>> {
        if let Some(img) = self.images.lock().get(id) {
            return Some(img.clone());
        }
        let path = self.root.as_ref()?.join("images").join(format!("{id}.png"));
        let img = Arc::new(Image::decode(&std::fs::read(path).ok()?).ok()?);
        self.images.lock().insert(id.clone(), img.clone());
        Some(img)
    }
}

impl ImageSource for Store {
    fn image(&self, id: &ImageId) -> Option<Arc<Image>> {
        Store::image(self, id)
    }
}
