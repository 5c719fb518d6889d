//! Serves a [`Backend`] over the JSON protocol spoken by `HttpBackend`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use vispipe_core::backend::{Backend, BackendError, BackendRequest};
use vispipe_core::image::{Image, ImageId};

fn reply_err(e: BackendError) -> Response {
    let status = match e {
        BackendError::UnknownImage { .. } | BackendError::FixtureMiss { .. } => StatusCode::NOT_FOUND,
        BackendError::Unsupported { .. } | BackendError::Protocol { .. } => StatusCode::BAD_REQUEST,
        BackendError::Transport { .. } => StatusCode::BAD_GATEWAY,
    };
    (status, Json(e)).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("backend task panicked")
}

async fn upload(State(be): State<Arc<dyn Backend>>, body: Bytes) -> Response {
    let img = match Image::decode(&body) {
        Ok(i) => Arc::new(i),
        Err(e) => return reply_err(BackendError::Protocol { message: e.to_string() }),
    };
    match blocking(move || be.upload(&img)).await {
        Ok(id) => Json(json!({ "image": id })).into_response(),
        Err(e) => reply_err(e),
    }
}

async fn fetch(State(be): State<Arc<dyn Backend>>, Path(id): Path<String>) -> Response {
    let Some(id) = ImageId::parse(&id) else {
        return reply_err(BackendError::UnknownImage { id });
    };
    match blocking(move || be.fetch(&id)).await {
        Ok(img) => ([(header::CONTENT_TYPE, "image/png")], img.to_png()).into_response(),
        Err(e) => reply_err(e),
    }
}

async fn call(State(be): State<Arc<dyn Backend>>, Json(req): Json<BackendRequest>) -> Response {
    match blocking(move || be.call(&req)).await {
        Ok(resp) => Json(resp).into_response(),
        Err(e) => reply_err(e),
    }
}

/// `/v1/images`, `/v1/images/{id}` and `/v1/call` backed by `backend`.
pub fn backend_router(backend: Arc<dyn Backend>) -> Router {
    Router::new()
        .route("/v1/images", post(upload))
        .route("/v1/images/{id}", get(fetch))
        .route("/v1/call", post(call))
        .layer(DefaultBodyLimit::max(64 << 20))
        .with_state(backend)
}
