//! HTTP service over the heatdiff engine: datasets loaded at start-up,
//! calibration sessions held in memory, scenario runs executed as background
//! jobs and kept on disk.

mod error;
mod runs;
mod sessions;

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::routing::{get, post, put};
use axum::Router;
use heatdiff_core::io::dataset::Dataset;
use tokio::net::TcpListener;

pub use error::{api_error, status_of};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Idle time after which a session is rejected with 410.
    pub session_ttl: Duration,
    /// Completed runs are written to `<runs_dir>/<run id>/run.json` and
    /// reloaded on start-up. Runs live in memory only when unset.
    pub runs_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { session_ttl: Duration::from_secs(3600), runs_dir: None }
    }
}

struct Inner {
    config: ServiceConfig,
    datasets: Vec<Arc<Dataset>>,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<sessions::Session>>>>,
    runs: Mutex<HashMap<String, Arc<runs::RunEntry>>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(datasets: Vec<Dataset>, config: ServiceConfig) -> heatdiff_core::Result<Self> {
        let runs = match &config.runs_dir {
            Some(dir) => runs::load_persisted(dir)?,
            None => HashMap::new(),
        };
        Ok(AppState(Arc::new(Inner {
            config,
            datasets: datasets.into_iter().map(Arc::new).collect(),
            sessions: Mutex::new(HashMap::new()),
            runs: Mutex::new(runs),
        })))
    }

    fn dataset(&self, id: &str) -> Option<Arc<Dataset>> {
        self.0.datasets.iter().find(|d| d.id == id).cloned()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/datasets", get(sessions::list_datasets))
        .route("/sessions", post(sessions::create))
        .route("/sessions/{id}", get(sessions::info))
        .route("/sessions/{id}/regions", get(sessions::regions))
        .route("/sessions/{id}/regions/{region}", get(sessions::region))
        .route("/sessions/{id}/calibrate/auto", post(sessions::calibrate_auto))
        .route("/sessions/{id}/gamma", put(sessions::update_gamma).get(sessions::gammas))
        .route("/sessions/{id}/runs", post(runs::start))
        .route("/runs/{id}/status", get(runs::status))
        .route("/runs/{id}/events", get(runs::events))
        .route("/runs/{id}/results", get(runs::results))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
