//! HTTP service: program generation and execution, a persistent run and
//! session store, and the backend protocol for remote callers.

pub mod api;
pub mod backend_api;
pub mod config;
pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use thiserror::Error;
use vispipe_core::interpreter::Interpreter;
use vispipe_core::registry::Registry;

pub use api::{router, AppState, Engine, Iteration, RunOutcome, Session};
pub use backend_api::backend_router;
pub use config::{BackendMode, ClientMode, ConfigError, ServiceConfig};
pub use error::ApiError;
pub use store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("listening on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server stopped: {0}")]
    Serve(std::io::Error),
}

impl AppState {
    pub fn from_config(cfg: &ServiceConfig) -> Result<AppState, ServiceError> {
        let engine = Engine {
            interp: Interpreter::new(Arc::new(Registry::standard()), cfg.backend.build()?),
            client: cfg.client.build()?,
            pools: config::load_pools(&cfg.pools)?,
            k: cfg.k,
            list_max: cfg.list_max,
        };
        let store = match &cfg.store {
            Some(dir) => Store::open(dir)?,
            None => Store::in_memory(),
        };
        Ok(AppState::new(engine, store))
    }
}

/// Serves until the process is stopped.
pub async fn serve(cfg: &ServiceConfig) -> Result<(), ServiceError> {
    let app = router(AppState::from_config(cfg)?);
    let listener =
        tokio::net::TcpListener::bind(cfg.listen).await.map_err(|source| ServiceError::Bind { addr: cfg.listen, source })?;
    axum::serve(listener, app).await.map_err(ServiceError::Serve)
}

/// A server on a background thread; stops when dropped.
pub struct Running {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Running {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Starts `app` on `addr` (port 0 picks a free port) in its own runtime.
pub fn spawn(app: Router, addr: SocketAddr) -> Result<Running, ServiceError> {
    let (ready_tx, ready_rx) = std::sync::mpsc::channel();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime");
        rt.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(addr).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = ready_tx.send(Err(e));
                    return;
                }
            };
            let _ = ready_tx.send(listener.local_addr());
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stop_rx.await;
                })
                .await;
        });
    });
    match ready_rx.recv().expect("server thread reports readiness") {
        Ok(bound) => Ok(Running { addr: bound, stop: Some(stop_tx), thread: Some(thread) }),
        Err(source) => {
            let _ = thread.join();
            Err(ServiceError::Bind { addr, source })
        }
    }
}
