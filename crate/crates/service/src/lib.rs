//! HTTP service exposing the simulator's operations.
//!
//! Experiments are long-running, so they execute as jobs: `POST
//! /api/v1/experiments` returns a job id, `GET /api/v1/jobs/{id}` reports
//! progress, and the CSV outputs are downloaded per file once the job
//! completes. Chain decoding and config validation are synchronous.

mod jobs;
mod routes;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use jobs::JobRegistry;
pub use routes::router;

/// Shared service state.
pub struct AppState {
    pub jobs: JobRegistry,
    pub output_root: PathBuf,
}

impl AppState {
    pub fn new(output_root: PathBuf) -> Arc<Self> {
        Arc::new(AppState { jobs: JobRegistry::default(), output_root })
    }
}

/// Binds `addr` and serves until the process ends. The bound address is
/// passed to `on_bind` (useful with port 0).
pub async fn serve(
    addr: SocketAddr,
    output_root: PathBuf,
    on_bind: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let state = AppState::new(output_root);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tracing::info!(%local, "experiment service listening");
    on_bind(local);
    axum::serve(listener, router(state)).await
}
