//! Steering service: hosts simulations that can be advanced, paused and
//! steered with interventions while their daily counts stream out over
//! server-sent events.
//!
//! Each simulation is owned by one worker thread. Handlers talk to it only
//! through its command queue and read metrics from its append-only log.

mod api;
mod error;
mod hosted;
mod model;
mod persist;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, Registry};
pub use error::{ApiError, Problem};
pub use hosted::{Hosted, Progress};
pub use model::{
    Ack, CompareRun, Comparison, CreateRequest, LoggedCommand, ScenarioInfo, SimulationHandle, Status,
    SteerCommand, StreamEnd, DEFAULT_SPEED,
};
pub use persist::Record;

/// Serve the API on `listener` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, registry: Arc<Registry>) -> std::io::Result<()> {
    let app = router(registry.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await?;
    registry.shut_down();
    Ok(())
}

/// Restore any persisted runs, bind `addr` and serve until ctrl-c.
pub fn run_blocking(addr: SocketAddr, persist_dir: Option<PathBuf>) -> std::io::Result<()> {
    let registry = match persist_dir {
        Some(dir) => Registry::restore(dir)?,
        None => Registry::new(None)?,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        serve(listener, registry).await
    })
}
