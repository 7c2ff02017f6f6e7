use std::collections::HashMap;
use std::convert::Infallible;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::Stream;
use heatdiff_api::{ApiError, ErrorKind, ReportKind, RunAccepted, RunRequest, RunState, RunStatus};
use heatdiff_core::dynamics::run::{simulate_run_with, RunConfig};
use heatdiff_core::io::export::RUN_FILE;
use heatdiff_core::io::result::RunResult;
use heatdiff_core::scenario::{preset_scenario, ScenarioSpec};
use tokio::sync::watch;

use crate::error::{api_error, decode, decode_value, Failure, Reply};
use crate::sessions::checkout;
use crate::AppState;

pub(crate) struct Finished {
    /// The structured run exactly as serialised by the engine.
    json: String,
    run: RunResult,
}

pub(crate) struct RunEntry {
    status: watch::Sender<RunStatus>,
    result: OnceLock<Finished>,
}

impl RunEntry {
    fn completed(id: String, json: String, run: RunResult) -> Self {
        let years = run.years.len() * run.regions.len();
        let status = RunStatus {
            run_id: id,
            scenario_id: run.metadata.scenario_id.clone(),
            state: RunState::Completed,
            completed_years: years,
            total_years: years,
            last: None,
            error: None,
        };
        let result = OnceLock::new();
        let _ = result.set(Finished { json, run });
        RunEntry { status: watch::Sender::new(status), result }
    }

    fn state(&self) -> RunState {
        self.status.borrow().state
    }
}

pub(crate) fn load_persisted(dir: &FsPath) -> heatdiff_core::Result<HashMap<String, Arc<RunEntry>>> {
    let mut runs = HashMap::new();
    if !dir.exists() {
        return Ok(runs);
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path().join(RUN_FILE);
        if !path.is_file() {
            continue;
        }
        let id = path.parent().and_then(|p| p.file_name()).unwrap().to_string_lossy().into_owned();
        let json = std::fs::read_to_string(&path)?;
        let run = RunResult::from_json(&json)?;
        runs.insert(id.clone(), Arc::new(RunEntry::completed(id, json, run)));
    }
    tracing::info!(count = runs.len(), dir = %dir.display(), "reloaded runs");
    Ok(runs)
}

fn persist(dir: &FsPath, id: &str, json: &str) -> std::io::Result<PathBuf> {
    let target = dir.join(id);
    std::fs::create_dir_all(&target)?;
    let path = target.join(RUN_FILE);
    std::fs::write(&path, json)?;
    Ok(path)
}

fn scenario_from(request: &RunRequest, kick_start_regions: &[String]) -> Reply<ScenarioSpec> {
    let spec = match (&request.preset, &request.scenario) {
        (Some(id), None) => {
            preset_scenario(id, kick_start_regions).map_err(|e| Failure::field("preset", e.to_string()))?
        }
        (None, Some(value)) => decode_value::<ScenarioSpec>("scenario", value)?,
        _ => return Err(Failure::field("", "give exactly one of preset or scenario")),
    };
    let errors: Vec<_> = spec
        .field_errors()
        .into_iter()
        .map(|mut e| {
            if request.scenario.is_some() {
                e.path = format!("scenario.{}", e.path);
            }
            e
        })
        .collect();
    if !errors.is_empty() {
        return Err(Failure::fields(format!("scenario {} is invalid", spec.id), errors));
    }
    Ok(spec)
}

pub async fn start(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Reply<(StatusCode, Json<RunAccepted>)> {
    let request: RunRequest = decode(&body)?;
    let mut session = checkout(&state, &id).await?;
    if let Some(active) = &session.active_run {
        let running = state.0.runs.lock().unwrap().get(active).is_some_and(|r| r.state() == RunState::Running);
        if running {
            return Err(Failure::conflict(format!("session {id} already has run {active} in flight")));
        }
    }
    let dataset = session.dataset.clone();
    let spec = scenario_from(&request, &dataset.kick_start_regions())?;
    let config = request.config.clone().unwrap_or_default();
    config.validate().map_err(|e| Failure::field("config", e.to_string()))?;
    spec.validate_regions(&dataset.region_ids())?;
    let horizon = dataset.horizon_violations(config.from, config.to);
    if !horizon.is_empty() {
        return Err(heatdiff_core::Error::Dataset(horizon).into());
    }
    let gammas = session.gammas();

    let run_id = uuid::Uuid::new_v4().simple().to_string();
    let total_years = dataset.regions.len() * (config.to - config.from + 1) as usize;
    let entry = Arc::new(RunEntry {
        status: watch::Sender::new(RunStatus {
            run_id: run_id.clone(),
            scenario_id: spec.id.clone(),
            state: RunState::Running,
            completed_years: 0,
            total_years,
            last: None,
            error: None,
        }),
        result: OnceLock::new(),
    });
    state.0.runs.lock().unwrap().insert(run_id.clone(), entry.clone());
    session.active_run = Some(run_id.clone());
    drop(session);

    let accepted = RunAccepted { run_id: run_id.clone(), scenario_id: spec.id.clone() };
    tracing::info!(run = %run_id, session = %id, scenario = %spec.id, "run started");
    let runs_dir = state.0.config.runs_dir.clone();
    tokio::spawn(async move {
        let job = entry.clone();
        let outcome = tokio::task::spawn_blocking(move || execute(&job, &dataset, &spec, &gammas, &config, runs_dir))
            .await
            .unwrap_or_else(|e| Err(ApiError::new(ErrorKind::Internal, format!("run panicked: {e}"))));
        entry.status.send_modify(|s| match outcome {
            Ok(()) => s.state = RunState::Completed,
            Err(e) => {
                tracing::warn!(run = %s.run_id, error = %e, "run failed");
                s.state = RunState::Failed;
                s.error = Some(e);
            }
        });
    });
    Ok((StatusCode::ACCEPTED, Json(accepted)))
}

fn execute(
    entry: &RunEntry,
    dataset: &heatdiff_core::io::dataset::Dataset,
    spec: &ScenarioSpec,
    gammas: &heatdiff_core::costs::GammaVector,
    config: &RunConfig,
    runs_dir: Option<PathBuf>,
) -> Result<(), ApiError> {
    let observer = |p: &heatdiff_core::dynamics::run::Progress| {
        entry.status.send_modify(|s| {
            s.completed_years += 1;
            s.last = Some(p.clone());
        });
    };
    let run = simulate_run_with(dataset, spec, gammas, config, &observer).map_err(|e| api_error(&e))?;
    let json = run.to_json().map_err(|e| api_error(&e))?;
    let run_id = entry.status.borrow().run_id.clone();
    if let Some(dir) = runs_dir {
        persist(&dir, &run_id, &json)
            .map_err(|e| ApiError::new(ErrorKind::Internal, format!("cannot store run {run_id}: {e}")))?;
    }
    let _ = entry.result.set(Finished { json, run });
    Ok(())
}

fn lookup(state: &AppState, id: &str) -> Reply<Arc<RunEntry>> {
    state.0.runs.lock().unwrap().get(id).cloned().ok_or_else(|| Failure::not_found(format!("unknown run {id}")))
}

pub async fn status(State(state): State<AppState>, Path(id): Path<String>) -> Reply<Json<RunStatus>> {
    Ok(Json(lookup(&state, &id)?.status.borrow().clone()))
}

fn event_for(status: &RunStatus) -> Event {
    let name = match status.state {
        RunState::Running => "progress",
        RunState::Completed => "completed",
        RunState::Failed => "failed",
    };
    Event::default().event(name).json_data(status).expect("status serialises")
}

/// Server-sent events: `progress` while the run is going, then one
/// `completed` or `failed` event, after which the stream ends.
pub async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Reply<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let rx = lookup(&state, &id)?.status.subscribe();
    let stream = futures::stream::unfold(Some((rx, true)), |next| async move {
        let (mut rx, first) = next?;
        if !first && rx.changed().await.is_err() {
            return None;
        }
        let status = rx.borrow_and_update().clone();
        let more = (!status.state.is_finished()).then_some((rx, false));
        Some((Ok(event_for(&status)), more))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub async fn results(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Reply<Response> {
    let kind = match query.get("report").map(String::as_str) {
        None | Some("run") => ReportKind::Run,
        Some("shares") => ReportKind::Shares,
        Some("emissions") => ReportKind::Emissions,
        Some("money") => ReportKind::Money,
        Some(other) => {
            return Err(Failure::field("report", format!("unknown report {other:?}; use shares, emissions, money or run")))
        }
    };
    let entry = lookup(&state, &id)?;
    let Some(done) = entry.result.get() else {
        let status = entry.status.borrow().clone();
        return Err(match status.error {
            Some(e) => Failure::conflict(format!("run {id} failed: {}", e.message)),
            None => Failure::conflict(format!("run {id} is still running")),
        });
    };
    Ok(match kind {
        ReportKind::Run => ([(header::CONTENT_TYPE, "application/json")], done.json.clone()).into_response(),
        ReportKind::Shares => Json(done.run.shares_report()).into_response(),
        ReportKind::Emissions => Json(done.run.emissions_report()).into_response(),
        ReportKind::Money => Json(done.run.money_report()).into_response(),
    })
}
