//! Neural capabilities behind a request/response protocol.
//!
//! Every neural module talks to a [`Backend`]: images are uploaded once and
//! referenced by content id, then an op request is sent and a typed
//! response comes back. The same message types are the JSON wire format of
//! the HTTP protocol (see [`http`]).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{BBox, Image, ImageId};
use crate::value::{MaskRepr, RegionRepr};

pub mod fixture;
pub mod http;
pub mod procedural;

pub use fixture::{FixtureBackend, FixtureSet, RecordingBackend};
pub use http::HttpBackend;
pub use procedural::{ProceduralBackend, ProceduralConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BackendRequest {
    Locate { image: ImageId, query: String },
    DetectFaces { image: ImageId },
    Segment { image: ImageId },
    Vqa { image: ImageId, question: String },
    ScoreRegions { image: ImageId, boxes: Vec<BBox>, texts: Vec<String> },
    Inpaint { image: ImageId, mask: MaskRepr, prompt: String },
    KnowledgeList { query: String, max: Option<u32> },
}

impl BackendRequest {
    pub fn op(&self) -> &'static str {
        match self {
            BackendRequest::Locate { .. } => "locate",
            BackendRequest::DetectFaces { .. } => "detect_faces",
            BackendRequest::Segment { .. } => "segment",
            BackendRequest::Vqa { .. } => "vqa",
            BackendRequest::ScoreRegions { .. } => "score_regions",
            BackendRequest::Inpaint { .. } => "inpaint",
            BackendRequest::KnowledgeList { .. } => "knowledge_list",
        }
    }

    pub fn image(&self) -> Option<&ImageId> {
        match self {
            BackendRequest::Locate { image, .. }
            | BackendRequest::DetectFaces { image }
            | BackendRequest::Segment { image }
            | BackendRequest::Vqa { image, .. }
            | BackendRequest::ScoreRegions { image, .. }
            | BackendRequest::Inpaint { image, .. } => Some(image),
            BackendRequest::KnowledgeList { .. } => None,
        }
    }

    /// Canonical fixture key: compact JSON of the request with sorted fields.
    pub fn key(&self) -> String {
        serde_json::to_value(self).expect("requests always serialize").to_string()
    }

    /// Fixture key with the image id replaced by `*`.
    pub fn wildcard_key(&self) -> Option<String> {
        self.image()?;
        let mut v = serde_json::to_value(self).expect("requests always serialize");
        v["image"] = serde_json::Value::String("*".into());
        Some(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendResponse {
    Regions { regions: Vec<RegionRepr> },
    Answer { text: String },
    Scores { matrix: Vec<Vec<f64>> },
    Image { image: ImageId },
    Texts { items: Vec<String> },
}

impl BackendResponse {
    fn kind(&self) -> &'static str {
        match self {
            BackendResponse::Regions { .. } => "regions",
            BackendResponse::Answer { .. } => "answer",
            BackendResponse::Scores { .. } => "scores",
            BackendResponse::Image { .. } => "image",
            BackendResponse::Texts { .. } => "texts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum BackendError {
    #[error("no fixture for request {key}")]
    FixtureMiss { key: String },
    #[error("backend does not know image {id}")]
    UnknownImage { id: String },
    #[error("backend cannot serve {op}: {reason}")]
    Unsupported { op: String, reason: String },
    #[error("malformed backend response: {message}")]
    Protocol { message: String },
    #[error("backend transport error: {message}")]
    Transport { message: String },
}

/// Checks that a response has the right shape for its request.
pub fn check_response(req: &BackendRequest, resp: &BackendResponse) -> Result<(), BackendError> {
    let bad = |message: String| Err(BackendError::Protocol { message });
    let expected = match req {
        BackendRequest::Locate { .. } | BackendRequest::DetectFaces { .. } | BackendRequest::Segment { .. } => "regions",
        BackendRequest::Vqa { .. } => "answer",
        BackendRequest::ScoreRegions { .. } => "scores",
        BackendRequest::Inpaint { .. } => "image",
        BackendRequest::KnowledgeList { .. } => "texts",
    };
    if resp.kind() != expected {
        return bad(format!("{} expects {expected}, got {}", req.op(), resp.kind()));
    }
    match (req, resp) {
        (BackendRequest::ScoreRegions { boxes, texts, .. }, BackendResponse::Scores { matrix }) => {
            if matrix.len() != boxes.len() || matrix.iter().any(|row| row.len() != texts.len()) {
                return bad(format!("score matrix must be {}x{}", boxes.len(), texts.len()));
            }
            if matrix.iter().flatten().any(|s| !(0.0..=1.0).contains(s)) {
                return bad("scores must lie in [0, 1]".into());
            }
        }
        (_, BackendResponse::Regions { regions }) if regions.iter().any(|r| !(0.0..=1.0).contains(&r.score)) => {
            return bad("region scores must lie in [0, 1]".into());
        }
        _ => {}
    }
    Ok(())
}

/// A provider of neural capabilities. Implementations must tolerate
/// concurrent calls.
pub trait Backend: Send + Sync {
    fn name(&self) -> String;

    /// Makes `image` addressable by its content id.
    fn upload(&self, image: &Arc<Image>) -> Result<ImageId, BackendError>;

    /// Retrieves an image produced by the backend (e.g. an inpainting result).
    fn fetch(&self, id: &ImageId) -> Result<Arc<Image>, BackendError>;

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn upload(&self, image: &Arc<Image>) -> Result<ImageId, BackendError> {
        (**self).upload(image)
    }
    fn fetch(&self, id: &ImageId) -> Result<Arc<Image>, BackendError> {
        (**self).fetch(id)
    }
    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).call(req)
    }
}

/// Thread-safe image map shared by the in-process backends.
#[derive(Debug, Default)]
pub(crate) struct ImageCache {
    images: std::sync::RwLock<std::collections::HashMap<ImageId, Arc<Image>>>,
}

impl ImageCache {
    pub(crate) fn put(&self, img: &Arc<Image>) -> ImageId {
        let id = img.id();
        self.images.write().expect("image cache poisoned").entry(id.clone()).or_insert_with(|| img.clone());
        id
    }

    pub(crate) fn get(&self, id: &ImageId) -> Result<Arc<Image>, BackendError> {
        self.images
            .read()
            .expect("image cache poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| BackendError::UnknownImage { id: id.to_string() })
    }
}
