//! JSON-over-HTTP client for a remote backend.
//!
//! Protocol (all paths relative to the base URL):
//!
//! | method | path               | body                    | reply                        |
//! |--------|--------------------|-------------------------|------------------------------|
//! | POST   | `/v1/images`       | PNG bytes               | `{"image": "<id>"}`          |
//! | GET    | `/v1/images/{id}`  |                         | PNG bytes                    |
//! | POST   | `/v1/call`         | [`BackendRequest`] JSON | [`BackendResponse`] JSON     |
//!
//! Errors come back with a 4xx/5xx status and a [`BackendError`] JSON body.
//! Image ids are content hashes, so the server must answer with the same id
//! the client computes.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Deserialize;

use super::{check_response, Backend, BackendError, BackendRequest, BackendResponse};
use crate::image::{Image, ImageId};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Deserialize)]
struct UploadReply {
    image: ImageId,
}

pub struct HttpBackend {
    base: String,
    client: reqwest::blocking::Client,
    uploaded: Mutex<HashSet<ImageId>>,
}

fn transport(e: impl std::fmt::Display) -> BackendError {
    BackendError::Transport { message: e.to_string() }
}

impl HttpBackend {
    pub fn new(base_url: &str) -> Result<Self, BackendError> {
        Self::with_timeout(base_url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(transport)?;
        Ok(HttpBackend { base: base_url.trim_end_matches('/').to_string(), client, uploaded: Mutex::new(HashSet::new()) })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn error_from(resp: reqwest::blocking::Response) -> BackendError {
        let status = resp.status();
        let body = resp.text().unwrap_or_default();
        serde_json::from_str::<BackendError>(&body)
            .unwrap_or_else(|_| BackendError::Transport { message: format!("HTTP {status}: {body}") })
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> String {
        format!("remote:{}", self.base)
    }

    fn upload(&self, image: &Arc<Image>) -> Result<ImageId, BackendError> {
        let id = image.id();
        if self.uploaded.lock().expect("upload set poisoned").contains(&id) {
            return Ok(id);
        }
        let resp = self
            .client
            .post(format!("{}/v1/images", self.base))
            .header("content-type", "image/png")
            .body(image.to_png())
            .send()
            .map_err(transport)?;
        if !resp.status().is_success() {
            return Err(Self::error_from(resp));
        }
        let reply: UploadReply = resp.json().map_err(|e| BackendError::Protocol { message: e.to_string() })?;
        if reply.image != id {
            return Err(BackendError::Protocol { message: format!("server assigned id {} to image {id}", reply.image) });
        }
        self.uploaded.lock().expect("upload set poisoned").insert(id.clone());
        Ok(id)
    }

    fn fetch(&self, id: &ImageId) -> Result<Arc<Image>, BackendError> {
        let resp = self.client.get(format!("{}/v1/images/{id}", self.base)).send().map_err(transport)?;
        if !resp.status().is_success() {
            return Err(Self::error_from(resp));
        }
        let bytes = resp.bytes().map_err(transport)?;
        let img = Image::decode(&bytes).map_err(|e| BackendError::Protocol { message: e.to_string() })?;
        Ok(Arc::new(img))
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let resp = self.client.post(format!("{}/v1/call", self.base)).json(req).send().map_err(transport)?;
        if !resp.status().is_success() {
            return Err(Self::error_from(resp));
        }
        let out: BackendResponse = resp.json().map_err(|e| BackendError::Protocol { message: e.to_string() })?;
        check_response(req, &out)?;
        Ok(out)
    }
}
