//! Replay backend answering from a fixture file, and a recorder that
//! captures another backend's answers into one.
//!
//! Fixture files are JSON:
//!
//! ```json
//! {
//!   "responses": { "<request key>": <response>, ... },
//!   "entries": [ { "request": <request>, "response": <response> }, ... ],
//!   "images": ["relative/path.png", ...]
//! }
//! ```
//!
//! A request key is the compact, field-sorted JSON of the request
//! ([`BackendRequest::key`]). Requests whose `image` is `"*"` match any image;
//! exact keys win over wildcard keys. `images` preloads pictures that
//! responses refer to (e.g. inpainting outputs).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{check_response, Backend, BackendError, BackendRequest, BackendResponse, ImageCache};
use crate::image::{Image, ImageId};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request: serde_json::Value,
    pub response: BackendResponse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureSet {
    #[serde(default)]
    pub responses: BTreeMap<String, BackendResponse>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<FixtureEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<String>,
}

impl Default for BackendResponse {
    fn default() -> Self {
        BackendResponse::Texts { items: vec![] }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureLoadError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing fixture file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("fixture image {path}: {message}")]
    Image { path: String, message: String },
}

impl FixtureSet {
    pub fn from_json(s: &str) -> Result<FixtureSet, FixtureLoadError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn insert(&mut self, req: &BackendRequest, resp: BackendResponse) {
        self.responses.insert(req.key(), resp);
    }

    /// Inserts a response matching `req` on any image.
    pub fn insert_any_image(&mut self, req: &BackendRequest, resp: BackendResponse) {
        let key = req.wildcard_key().unwrap_or_else(|| req.key());
        self.responses.insert(key, resp);
    }

    /// All entries as a key → response map.
    fn flatten(&self) -> BTreeMap<String, BackendResponse> {
        let mut out = self.responses.clone();
        for e in &self.entries {
            // Round-trip through the typed request where possible so that
            // hand-written entries hit the same canonical key.
            let key = match serde_json::from_value::<BackendRequest>(e.request.clone()) {
                Ok(req) => req.key(),
                Err(_) => e.request.to_string(),
            };
            out.insert(key, e.response.clone());
        }
        out
    }
}

/// Deterministic backend that answers only from fixtures.
#[derive(Debug, Default)]
pub struct FixtureBackend {
    responses: BTreeMap<String, BackendResponse>,
    images: ImageCache,
}

impl FixtureBackend {
    pub fn new(set: FixtureSet) -> Self {
        FixtureBackend { responses: set.flatten(), images: ImageCache::default() }
    }

    /// Loads a fixture file; image paths resolve relative to the file.
    pub fn load(path: &Path) -> Result<Self, FixtureLoadError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|source| FixtureLoadError::Io { path: path.display().to_string(), source })?;
        let set = FixtureSet::from_json(&raw)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let backend = FixtureBackend::new(set.clone());
        for rel in &set.images {
            let p = base.join(rel);
            let bytes = std::fs::read(&p)
                .map_err(|source| FixtureLoadError::Io { path: p.display().to_string(), source })?;
            let img = Image::decode(&bytes)
                .map_err(|e| FixtureLoadError::Image { path: p.display().to_string(), message: e.to_string() })?;
            backend.images.put(&Arc::new(img));
        }
        Ok(backend)
    }

    /// Makes an image available to `fetch` (e.g. a canned inpainting result).
    pub fn preload(&self, img: Arc<Image>) -> ImageId {
        self.images.put(&img)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for FixtureBackend {
    fn name(&self) -> String {
        "fixtures".into()
    }

    fn upload(&self, image: &Arc<Image>) -> Result<ImageId, BackendError> {
        Ok(self.images.put(image))
    }

    fn fetch(&self, id: &ImageId) -> Result<Arc<Image>, BackendError> {
        self.images.get(id)
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let key = req.key();
        let resp = self
            .responses
            .get(&key)
            .or_else(|| req.wildcard_key().and_then(|k| self.responses.get(&k)))
            .ok_or(BackendError::FixtureMiss { key })?;
        check_response(req, resp)?;
        Ok(resp.clone())
    }
}

/// Forwards to an inner backend and records every successful exchange.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<FixtureSet>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, recorded: Mutex::new(FixtureSet::default()) }
    }

    pub fn fixtures(&self) -> FixtureSet {
        self.recorded.lock().expect("recorder poisoned").clone()
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn name(&self) -> String {
        format!("recording({})", self.inner.name())
    }

    fn upload(&self, image: &Arc<Image>) -> Result<ImageId, BackendError> {
        self.inner.upload(image)
    }

    fn fetch(&self, id: &ImageId) -> Result<Arc<Image>, BackendError> {
        self.inner.fetch(id)
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let resp = self.inner.call(req)?;
        self.recorded.lock().expect("recorder poisoned").insert(req, resp.clone());
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(c: u8) -> Arc<Image> {
        Arc::new(Image::new(3, 3, [c, c, c, 255]).unwrap())
    }

    #[test]
    fn exact_then_wildcard_then_miss() {
        let a = img(1);
        let b = img(2);
        let mut set = FixtureSet::default();
        let q = |image: ImageId| BackendRequest::Vqa { image, question: "how many dogs?".into() };
        set.insert(&q(a.id()), BackendResponse::Answer { text: "2".into() });
        set.insert_any_image(&q(a.id()), BackendResponse::Answer { text: "0".into() });
        let be = FixtureBackend::new(set);
        let ia = be.upload(&a).unwrap();
        let ib = be.upload(&b).unwrap();
        assert_eq!(be.call(&q(ia)).unwrap(), BackendResponse::Answer { text: "2".into() });
        assert_eq!(be.call(&q(ib)).unwrap(), BackendResponse::Answer { text: "0".into() });
        let miss = BackendRequest::Vqa { image: a.id(), question: "what?".into() };
        match be.call(&miss) {
            Err(BackendError::FixtureMiss { key }) => assert!(key.contains("what?")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn entries_form_parses() {
        let set = FixtureSet::from_json(
            r#"{"entries":[{"request":{"op":"knowledge_list","query":"colors","max":null},
                            "response":{"kind":"texts","items":["red","blue"]}}]}"#,
        )
        .unwrap();
        let be = FixtureBackend::new(set);
        let r = be.call(&BackendRequest::KnowledgeList { query: "colors".into(), max: None }).unwrap();
        assert_eq!(r, BackendResponse::Texts { items: vec!["red".into(), "blue".into()] });
    }

    #[test]
    fn malformed_fixture_response_is_a_protocol_error() {
        let mut set = FixtureSet::default();
        let req = BackendRequest::KnowledgeList { query: "q".into(), max: None };
        set.insert(&req, BackendResponse::Answer { text: "nope".into() });
        assert!(matches!(FixtureBackend::new(set).call(&req), Err(BackendError::Protocol { .. })));
    }

    #[test]
    fn recorder_replays_identically() {
        let mut set = FixtureSet::default();
        let req = BackendRequest::KnowledgeList { query: "q".into(), max: Some(3) };
        set.insert(&req, BackendResponse::Texts { items: vec!["a".into()] });
        let rec = RecordingBackend::new(FixtureBackend::new(set));
        let first = rec.call(&req).unwrap();
        let replay = FixtureBackend::new(rec.fixtures());
        assert_eq!(replay.call(&req).unwrap(), first);
    }

    proptest! {
        #[test]
        fn identical_requests_get_byte_identical_responses(
            ops in proptest::collection::vec((0usize..4, "[a-z]{1,5}"), 1..40)
        ) {
            let images: Vec<Arc<Image>> = (0..4).map(|i| img(i as u8)).collect();
            let mut set = FixtureSet::default();
            for (i, im) in images.iter().enumerate() {
                for q in ["a", "b", "c"] {
                    set.insert(
                        &BackendRequest::Vqa { image: im.id(), question: q.into() },
                        BackendResponse::Answer { text: format!("{i}{q}") },
                    );
                }
            }
            let be = FixtureBackend::new(set);
            let mut seen: BTreeMap<String, String> = BTreeMap::new();
            for (i, q) in ops {
                let req = BackendRequest::Vqa { image: be.upload(&images[i]).unwrap(), question: q };
                let out = match be.call(&req) {
                    Ok(r) => serde_json::to_string(&r).unwrap(),
                    Err(e) => serde_json::to_string(&e).unwrap(),
                };
                if let Some(prev) = seen.insert(req.key(), out.clone()) {
                    prop_assert_eq!(prev, out);
                }
            }
        }
    }
}
