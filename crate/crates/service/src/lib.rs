//! HTTP/JSON service over interactive correction sessions, with a
//! server-sent event stream per session.

mod error;
mod routes;
mod state;

use std::net::SocketAddr;

use tokio::net::TcpListener;

pub use error::{ApiError, ErrorBody};
pub use routes::{
    router, ApproveResponse, BenchmarkRequest, CreateSession, CreatedSession, InstructionRequest, InstructionResponse,
    KbListing, ScenarioSummary, StateResponse, TextRequest,
};
pub use state::{AppState, ServiceConfig};

/// Bind and serve until the future resolves or the process is interrupted.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown()).await
}

/// Serve on an ephemeral local port in the background; returns the address.
pub async fn spawn_local(state: AppState) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(state)).await {
            tracing::error!(error = %e, "local service stopped");
        }
    });
    Ok(addr)
}

async fn shutdown() {
    let _ = tokio::signal::ctrl_c().await;
}
