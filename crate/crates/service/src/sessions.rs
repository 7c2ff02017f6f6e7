use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use heatdiff_api::{
    region_view, AutoCalibrate, AutoCalibrated, CreateSession, DatasetInfo, GammaSource, GammaUpdate, RegionView,
    SessionInfo,
};
use heatdiff_core::calibration::{CalibrationOptions, CalibrationResult, CalibrationSession};
use heatdiff_core::costs::{GammaSlice, GammaVector};
use heatdiff_core::dynamics::run::RunConfig;
use heatdiff_core::io::dataset::{gammas_csv, Dataset};
use tokio::sync::OwnedMutexGuard;

use crate::error::{decode, Failure, Reply};
use crate::AppState;

pub(crate) struct Session {
    pub id: String,
    pub dataset: Arc<Dataset>,
    pub gamma_source: GammaSource,
    /// One calibration session per dataset region, in dataset order.
    pub regions: Vec<CalibrationSession>,
    pub active_run: Option<String>,
    last_used: Instant,
    expired: bool,
}

impl Session {
    pub fn gammas(&self) -> GammaVector {
        GammaVector { regions: self.regions.iter().map(|c| (c.region_id().to_string(), c.gamma().clone())).collect() }
    }

    fn info(&self, ttl_s: u64) -> SessionInfo {
        SessionInfo {
            id: self.id.clone(),
            dataset: self.dataset.id.clone(),
            dataset_hash: self.dataset.hash.clone(),
            gamma_source: self.gamma_source,
            regions: self.dataset.regions.iter().map(|r| r.id.clone()).collect(),
            technologies: self.dataset.technologies.iter().map(|t| t.id.clone()).collect(),
            ttl_s,
        }
    }

    fn view(&self, r: usize) -> RegionView {
        let cs = &self.regions[r];
        let history = &self.dataset.regions[r].history;
        let series = (0..self.dataset.technologies.len()).map(|k| history.series(k)).collect();
        region_view(cs.projection(), cs.gamma(), series, cs.diagnostics().cloned())
    }

    fn region_index(&self, region: &str) -> Option<usize> {
        self.regions.iter().position(|c| c.region_id() == region)
    }
}

/// Locks a live session. Expired sessions stay known so that they answer 410
/// rather than 404.
pub(crate) async fn checkout(state: &AppState, id: &str) -> Reply<OwnedMutexGuard<Session>> {
    let slot = state.0.sessions.lock().unwrap().get(id).cloned();
    let slot = slot.ok_or_else(|| Failure::not_found(format!("unknown session {id}")))?;
    let mut session = slot.lock_owned().await;
    if session.expired || session.last_used.elapsed() > state.0.config.session_ttl {
        if !session.expired {
            session.expired = true;
            session.regions.iter_mut().for_each(CalibrationSession::close);
        }
        return Err(Failure::gone(format!("session {id} has expired")));
    }
    session.last_used = Instant::now();
    Ok(session)
}

pub(crate) async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Reply<T> + Send + 'static) -> Reply<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| Failure::internal(format!("worker failed: {e}")))?
}

pub async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetInfo>> {
    Json(
        state
            .0
            .datasets
            .iter()
            .map(|d| DatasetInfo {
                id: d.id.clone(),
                hash: d.hash.clone(),
                regions: d.regions.iter().map(|r| r.id.clone()).collect(),
                technologies: d.technologies.iter().map(|t| t.id.clone()).collect(),
                kick_start_regions: d.kick_start_regions(),
                has_gammas: d.gammas.is_some(),
            })
            .collect(),
    )
}

fn gamma_source(query: &HashMap<String, String>, dataset: &Dataset) -> Reply<GammaSource> {
    match query.get("gamma").map(String::as_str) {
        None if dataset.gammas.is_some() => Ok(GammaSource::Dataset),
        None => Ok(GammaSource::Auto),
        Some("zero") => Ok(GammaSource::Zero),
        Some("auto") => Ok(GammaSource::Auto),
        Some("dataset") if dataset.gammas.is_some() => Ok(GammaSource::Dataset),
        Some("dataset") => Err(Failure::field("gamma", format!("dataset {} ships no gammas", dataset.id))),
        Some(other) => Err(Failure::field("gamma", format!("unknown source {other:?}; use zero, auto or dataset"))),
    }
}

pub async fn create(
    State(state): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
    body: Bytes,
) -> Reply<(StatusCode, Json<SessionInfo>)> {
    let request: CreateSession = decode(&body)?;
    let dataset = state
        .dataset(&request.dataset)
        .ok_or_else(|| Failure::not_found(format!("unknown dataset {}", request.dataset)))?;
    let source = gamma_source(&query, &dataset)?;
    let data = dataset.clone();
    let regions = blocking(move || {
        let n = data.technologies.len();
        data.regions
            .iter()
            .map(|r| {
                let gamma = match source {
                    GammaSource::Dataset => data
                        .gammas
                        .as_ref()
                        .and_then(|g| g.slice(&r.id))
                        .cloned()
                        .ok_or_else(|| Failure::internal(format!("dataset gammas lack region {}", r.id)))?,
                    GammaSource::Zero | GammaSource::Auto => GammaSlice::zero(n),
                };
                let mut cs =
                    CalibrationSession::new(data.clone(), &r.id, gamma, RunConfig::default(), CalibrationOptions::default())?;
                if source == GammaSource::Auto {
                    cs.auto_calibrate()?;
                }
                Ok(cs)
            })
            .collect::<Reply<Vec<_>>>()
    })
    .await?;

    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session {
        id: id.clone(),
        dataset,
        gamma_source: source,
        regions,
        active_run: None,
        last_used: Instant::now(),
        expired: false,
    };
    let info = session.info(state.0.config.session_ttl.as_secs());
    state.0.sessions.lock().unwrap().insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
    tracing::info!(session = %id, dataset = %info.dataset, gamma = %source, "session created");
    Ok((StatusCode::CREATED, Json(info)))
}

pub async fn info(State(state): State<AppState>, Path(id): Path<String>) -> Reply<Json<SessionInfo>> {
    let session = checkout(&state, &id).await?;
    Ok(Json(session.info(state.0.config.session_ttl.as_secs())))
}

pub async fn regions(State(state): State<AppState>, Path(id): Path<String>) -> Reply<Json<Vec<RegionView>>> {
    let session = checkout(&state, &id).await?;
    Ok(Json((0..session.regions.len()).map(|r| session.view(r)).collect()))
}

pub async fn region(
    State(state): State<AppState>,
    Path((id, region)): Path<(String, String)>,
) -> Reply<Json<RegionView>> {
    let session = checkout(&state, &id).await?;
    let r = session
        .region_index(&region)
        .ok_or_else(|| Failure::not_found(format!("unknown region {region}")))?;
    Ok(Json(session.view(r)))
}

pub async fn calibrate_auto(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Reply<Json<AutoCalibrated>> {
    let request: AutoCalibrate = if body.iter().all(u8::is_ascii_whitespace) { AutoCalibrate::default() } else { decode(&body)? };
    let mut session = checkout(&state, &id).await?;
    let targets: Vec<usize> = match &request.region {
        Some(region) => vec![session
            .region_index(region)
            .ok_or_else(|| Failure::field("region", format!("unknown region {region}")))?],
        None => (0..session.regions.len()).collect(),
    };
    blocking(move || {
        let mut results = Vec::with_capacity(targets.len());
        for r in targets {
            let cs = &mut session.regions[r];
            let diagnostics = cs.auto_calibrate()?.clone();
            results.push(CalibrationResult { region: cs.region_id().to_string(), gamma: cs.gamma().clone(), diagnostics });
        }
        Ok(Json(AutoCalibrated {
            converged: results.iter().all(|r| r.diagnostics.converged),
            results,
            gammas: session.gammas(),
        }))
    })
    .await
}

pub async fn update_gamma(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Reply<Json<RegionView>> {
    let update: GammaUpdate = decode(&body)?;
    let mut session = checkout(&state, &id).await?;
    let r = session
        .region_index(&update.region)
        .ok_or_else(|| Failure::field("region", format!("unknown region {}", update.region)))?;
    if session.dataset.tech_index(&update.tech).is_err() {
        return Err(Failure::field("tech", format!("unknown technology {}", update.tech)));
    }
    blocking(move || {
        session.regions[r].apply_gamma_override(&update.tech, update.value)?;
        Ok(Json(session.view(r)))
    })
    .await
}

pub async fn gammas(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Reply<Response> {
    let session = checkout(&state, &id).await?;
    let gammas = session.gammas();
    match query.get("format").map(String::as_str) {
        None | Some("json") => Ok(Json(gammas).into_response()),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], gammas_csv(&session.dataset, &gammas)).into_response()),
        Some(other) => Err(Failure::field("format", format!("unknown format {other:?}; use json or csv"))),
    }
}
