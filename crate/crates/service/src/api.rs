use std::collections::{HashMap, VecDeque};
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use epiroom_core::scenario::BUILTIN_SCENARIOS;
use epiroom_core::{CountryConfig, Scenario};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::Value;
use tower_http::cors::CorsLayer;

use crate::error::{parse_body, ApiError};
use crate::hosted::Hosted;
use crate::model::{
    Ack, CompareRun, Comparison, CreateRequest, ScenarioInfo, SimulationHandle, SteerCommand, StreamEnd,
};
use crate::persist::Record;

/// All hosted simulations, keyed by id.
pub struct Registry {
    sims: RwLock<HashMap<String, Arc<Hosted>>>,
    persist_dir: Option<PathBuf>,
}

impl Registry {
    pub fn new(persist_dir: Option<PathBuf>) -> std::io::Result<Arc<Registry>> {
        if let Some(dir) = &persist_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Arc::new(Registry {
            sims: RwLock::new(HashMap::new()),
            persist_dir,
        }))
    }

    /// Open a registry on `persist_dir` and rebuild every run recorded there
    /// by replaying its command log.
    pub fn restore(persist_dir: PathBuf) -> std::io::Result<Arc<Registry>> {
        let registry = Registry::new(Some(persist_dir.clone()))?;
        for record in Record::load_all(&persist_dir)? {
            let id = record.id.clone();
            match Hosted::launch(
                id.clone(),
                record.config.clone(),
                record.scenario.clone(),
                record.seed,
                Some(persist_dir.clone()),
                Some(&record),
            ) {
                Ok(hosted) => {
                    log::info!("restored simulation {id} at day {}", hosted.handle().current_day);
                    registry.sims.write().unwrap().insert(id, hosted);
                }
                Err(e) => log::warn!("could not restore simulation {id}: {e}"),
            }
        }
        Ok(registry)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Hosted>, ApiError> {
        self.sims
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_simulation(id))
    }

    pub fn handles(&self) -> Vec<SimulationHandle> {
        let mut handles: Vec<_> = self.sims.read().unwrap().values().map(|h| h.handle()).collect();
        handles.sort_by(|a, b| a.id.cmp(&b.id));
        handles
    }

    pub async fn create(&self, request: CreateRequest) -> Result<SimulationHandle, ApiError> {
        let config = resolve_config(&request.config)?;
        let scenario = resolve_scenario(&request.scenario, config.timeline_compression)?;
        let seed = request.seed.or(scenario.seeds.first().copied()).unwrap_or(1);
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.persist_dir.clone();
        let launch_id = id.clone();
        let hosted =
            tokio::task::spawn_blocking(move || Hosted::launch(launch_id, config, scenario, seed, dir, None))
                .await
                .map_err(|e| ApiError::internal(e.to_string()))??;
        let handle = hosted.handle();
        self.sims.write().unwrap().insert(id, hosted);
        Ok(handle)
    }

    pub fn remove(&self, id: &str) -> Result<(), ApiError> {
        let hosted = self
            .sims
            .write()
            .unwrap()
            .remove(id)
            .ok_or_else(|| ApiError::unknown_simulation(id))?;
        hosted.shut_down();
        if let Some(dir) = &self.persist_dir {
            Record::remove(dir, id).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok(())
    }

    /// Stop every worker, leaving persisted records in place.
    pub fn shut_down(&self) {
        for hosted in self.sims.read().unwrap().values() {
            hosted.shut_down();
        }
    }
}

fn resolve_config(value: &Value) -> Result<CountryConfig, ApiError> {
    match value {
        Value::String(name) => CountryConfig::preset(name)
            .ok_or_else(|| ApiError::validation("config", format!("unknown config preset `{name}`"))),
        Value::Object(_) => {
            CountryConfig::from_json(&value.to_string()).map_err(|e| ApiError::from_core("config", e))
        }
        _ => Err(ApiError::validation(
            "config",
            "expected a preset name or a config object",
        )),
    }
}

fn resolve_scenario(value: &Value, compression: f64) -> Result<Scenario, ApiError> {
    match value {
        Value::String(name) if BUILTIN_SCENARIOS.contains(&name.as_str()) => {
            Scenario::builtin(name, compression).map_err(|e| ApiError::from_core("scenario", e))
        }
        Value::String(name) => Err(ApiError::validation(
            "scenario",
            format!("unknown scenario `{name}`"),
        )),
        Value::Object(_) => {
            Scenario::from_json(&value.to_string()).map_err(|e| ApiError::from_core("scenario", e))
        }
        _ => Err(ApiError::validation(
            "scenario",
            "expected a scenario name or a scenario object",
        )),
    }
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route(
            "/api/v1/simulations",
            get(list_simulations).post(create_simulation),
        )
        .route(
            "/api/v1/simulations/{id}",
            get(show_simulation).delete(delete_simulation),
        )
        .route("/api/v1/simulations/{id}/commands", post(submit_command))
        .route("/api/v1/simulations/{id}/metrics", get(metrics))
        .route("/api/v1/simulations/{id}/stream", get(stream_metrics))
        .route("/api/v1/scenarios", get(list_scenarios))
        .route("/api/v1/compare", get(compare))
        .fallback(|uri: axum::http::Uri| async move { ApiError::no_route(uri.path()) })
        .layer(CorsLayer::permissive())
        .with_state(registry)
}

type Shared = State<Arc<Registry>>;

async fn list_simulations(State(registry): Shared) -> Json<Vec<SimulationHandle>> {
    Json(registry.handles())
}

async fn create_simulation(State(registry): Shared, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let request: CreateRequest = parse_body(&body)?;
    let handle = registry.create(request).await?;
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn show_simulation(
    State(registry): Shared,
    Path(id): Path<String>,
) -> Result<Json<SimulationHandle>, ApiError> {
    Ok(Json(registry.get(&id)?.handle()))
}

async fn delete_simulation(State(registry): Shared, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    registry.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn submit_command(
    State(registry): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Ack>, ApiError> {
    let hosted = registry.get(&id)?;
    let command: SteerCommand = parse_body(&body).map_err(|e| ApiError {
        code: if e.code == "validation_error" {
            "invalid_command"
        } else {
            e.code
        },
        ..e
    })?;
    Ok(Json(hosted.submit(command).await?))
}

#[derive(Debug, Deserialize)]
struct FromDay {
    #[serde(default)]
    from_day: Option<u32>,
}

fn from_day(query: Result<Query<FromDay>, QueryRejection>) -> Result<Option<u32>, ApiError> {
    query
        .map(|Query(q)| q.from_day)
        .map_err(|e| ApiError::malformed(e.body_text()).with_field("from_day"))
}

async fn metrics(
    State(registry): Shared,
    Path(id): Path<String>,
    query: Result<Query<FromDay>, QueryRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let hosted = registry.get(&id)?;
    let from = from_day(query)?.unwrap_or(0);
    Ok(Json(hosted.metrics(from)))
}

struct Cursor {
    hosted: Arc<Hosted>,
    progress: tokio::sync::watch::Receiver<crate::hosted::Progress>,
    next: usize,
    pending: VecDeque<epiroom_core::DailyCounts>,
    ended: bool,
}

/// Server-sent events: one `DailyCounts` per event with the day as event id,
/// replaying from `from_day` (or after `Last-Event-ID`) and then following the
/// run live. A final `end` event closes the stream once the run can no
/// longer produce days.
async fn stream_metrics(
    State(registry): Shared,
    Path(id): Path<String>,
    headers: HeaderMap,
    query: Result<Query<FromDay>, QueryRejection>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let hosted = registry.get(&id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u32>().ok())
        .map(|last| last + 1);
    let start = resume.or(from_day(query)?).unwrap_or(0);
    let cursor = Cursor {
        progress: hosted.subscribe(),
        hosted,
        next: start as usize,
        pending: VecDeque::new(),
        ended: false,
    };
    let events = stream::unfold(cursor, |mut cur| async move {
        loop {
            if let Some(counts) = cur.pending.pop_front() {
                let event = Event::default()
                    .id(counts.day.to_string())
                    .json_data(counts)
                    .expect("counts serialize");
                return Some((Ok(event), cur));
            }
            if cur.ended {
                return None;
            }
            let progress = *cur.progress.borrow_and_update();
            let rows = cur.hosted.rows_from(cur.next);
            if !rows.is_empty() {
                cur.next += rows.len();
                cur.pending.extend(rows);
                continue;
            }
            if progress.done || cur.progress.changed().await.is_err() {
                cur.ended = true;
                let handle = cur.hosted.handle();
                let end = StreamEnd {
                    status: handle.status,
                    current_day: handle.current_day,
                };
                let event = Event::default()
                    .event("end")
                    .json_data(end)
                    .expect("end serializes");
                return Some((Ok(event), cur));
            }
        }
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

async fn list_scenarios() -> Json<Vec<ScenarioInfo>> {
    let compression = CountryConfig::desk().timeline_compression;
    let infos = BUILTIN_SCENARIOS
        .iter()
        .map(|name| {
            let s = Scenario::builtin(name, compression).expect("built-in scenario");
            ScenarioInfo {
                name: s.name,
                horizon: s.horizon,
                seeds: s.seeds,
            }
        })
        .collect();
    Json(infos)
}

#[derive(Debug, Deserialize)]
struct CompareQuery {
    ids: String,
}

/// Active-case series of 2 to 4 runs sharing one config, with peak markers.
async fn compare(
    State(registry): Shared,
    query: Result<Query<CompareQuery>, QueryRejection>,
) -> Result<Json<Comparison>, ApiError> {
    let Query(query) = query.map_err(|e| ApiError::malformed(e.body_text()).with_field("ids"))?;
    let ids: Vec<&str> = query
        .ids
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if !(2..=4).contains(&ids.len()) {
        return Err(ApiError::invalid_comparison(format!(
            "an overlay needs 2 to 4 runs, got {}",
            ids.len()
        )));
    }
    let hosted = ids
        .iter()
        .map(|id| registry.get(id))
        .collect::<Result<Vec<_>, _>>()?;
    let digest = hosted[0].config_digest.clone();
    if let Some(other) = hosted.iter().find(|h| h.config_digest != digest) {
        return Err(ApiError::config_mismatch(format!(
            "run `{}` uses config {} but `{}` uses {digest}",
            other.id, other.config_digest, hosted[0].id
        )));
    }
    let runs = hosted
        .iter()
        .map(|h| CompareRun::from_days(h.id.clone(), h.scenario.clone(), h.seed, &h.metrics(0)))
        .collect();
    Ok(Json(Comparison {
        config_digest: digest,
        runs,
    }))
}
