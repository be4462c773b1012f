//! Session service and command-line front end for the painting sketcher.
//!
//! The service keeps each session as an append-only JSONL journal under
//! `data_dir/sessions` and rebuilds state from the journals at startup.

pub mod cli;
pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::sync::Arc;

use anyhow::Context;
use tokio::net::TcpListener;

pub use config::ServiceConfig;
pub use error::{ApiError, ErrorBody};
pub use routes::router;
pub use state::{event_message, session_view, AppState, JournalStore};

/// Loads state, binds the listen address and serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> anyhow::Result<()> {
    let addr = cfg.listen;
    let state = AppState::open(cfg)?;
    let listener = TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    serve_on(listener, state).await
}

pub async fn serve_on(listener: TcpListener, state: Arc<AppState>) -> anyhow::Result<()> {
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    // the bound address, for callers that asked for port 0
    println!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("serving")
}
