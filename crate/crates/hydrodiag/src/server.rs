//! JSON-over-HTTP API for the labeling front end.
//!
//! Reads go through a shared read lock on the in-memory state and never wait
//! for a job. Mutations (labels, train) take the single writer slot; a second
//! mutation while one is in flight gets `409 Conflict`. Training runs on a
//! blocking worker and is observed through `GET /api/v1/jobs/{id}`. Every
//! mutation persists the state file before it is published to readers.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hydrodiag_core::cluster::NOISE;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{OwnedMutexGuard, RwLock};

use crate::formats::{format_timestamp, json_f64, parse_timestamp};
use crate::pipeline::{embedded_points, test_summary, LabelOutcome, Pipeline, RunOutcome};
use crate::state::{state_labels, LabelOverrides, ProjectState, Stage, StageStatus};
use crate::{Error, Result};

/// Largest number of rows one `/signals` request may return.
pub const MAX_SIGNAL_ROWS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: u64,
    pub kind: &'static str,
    pub status: JobStatus,
    /// Stage being run, while running.
    pub stage: Option<Stage>,
    pub stages_done: Vec<Stage>,
    pub error: Option<String>,
    pub started_at: String,
    pub finished_at: Option<String>,
}

struct Shared {
    state: RwLock<ProjectState>,
    path: Option<PathBuf>,
    writer: Arc<tokio::sync::Mutex<()>>,
    jobs: Mutex<BTreeMap<u64, Job>>,
    next_job: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// `path` is where mutations are persisted; `None` keeps them in memory.
    pub fn new(state: ProjectState, path: Option<PathBuf>) -> Self {
        Self(Arc::new(Shared {
            state: RwLock::new(state),
            path,
            writer: Arc::new(tokio::sync::Mutex::new(())),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
        }))
    }

    pub async fn snapshot(&self) -> ProjectState {
        self.0.state.read().await.clone()
    }

    fn job_update(&self, id: u64, f: impl FnOnce(&mut Job)) {
        if let Some(j) = self.0.jobs.lock().expect("job table").get_mut(&id) {
            f(j);
        }
    }

    fn claim_writer(&self) -> std::result::Result<OwnedMutexGuard<()>, ApiError> {
        self.0.writer.clone().try_lock_owned().map_err(|_| ApiError::busy())
    }

    fn pipeline(&self, state: ProjectState) -> Pipeline {
        let p = Pipeline::from_state(state);
        match &self.0.path {
            Some(path) => p.with_checkpoint(path.clone()),
            None => p,
        }
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn busy() -> Self {
        Self {
            status: StatusCode::CONFLICT,
            message: "busy: another mutation is in progress".into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Labels(_) | Error::Config(_) | Error::Parse { .. } | Error::Json(_) => StatusCode::BAD_REQUEST,
            Error::NotReady(_) | Error::Stale(_) => StatusCode::CONFLICT,
            Error::Stage { cause, .. } if matches!(**cause, Error::Labels(_) | Error::Config(_)) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/state", get(get_state))
        .route("/api/v1/embedding", get(get_embedding))
        .route("/api/v1/clusters", get(get_clusters))
        .route("/api/v1/signals", get(get_signals))
        .route("/api/v1/scores", get(get_scores))
        .route("/api/v1/labels", post(post_labels))
        .route("/api/v1/train", post(post_train))
        .route("/api/v1/jobs/{id}", get(get_job))
        .with_state(app)
}

/// Binds `addr` and serves until Ctrl-C. A busy port fails here, before any
/// request is accepted.
pub async fn serve(path: PathBuf, addr: SocketAddr) -> Result<()> {
    let state = ProjectState::load(&path)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot listen on {addr}: {e}")))?;
    log::info!("serving {} on http://{}", path.display(), listener.local_addr().map_err(|e| Error::io(&path, e))?);
    axum::serve(listener, router(AppState::new(state, Some(path.clone()))))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(&path, e))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn get_state(State(app): State<AppState>) -> ApiResult<Json<Value>> {
    let s = app.0.state.read().await;
    let stages: Vec<Value> = s
        .manifest
        .stages
        .iter()
        .map(|r| {
            json!({
                "stage": r.stage,
                "status": r.status,
                "stale": r.status == StageStatus::Stale,
                "seed": r.seed,
                "config_hash": r.config_hash,
                "started_at": r.started_at,
                "finished_at": r.finished_at,
                "error": r.error,
            })
        })
        .collect();
    let assignments: BTreeMap<&str, Value> = s
        .assignments
        .iter()
        .map(|(k, a)| (k.as_str(), json!({ "n_clusters": a.n_clusters, "noise": a.noise_count() })))
        .collect();
    let summary = test_summary(&s).ok();
    let running: Vec<u64> = app
        .0
        .jobs
        .lock()
        .expect("job table")
        .values()
        .filter(|j| j.status == JobStatus::Running)
        .map(|j| j.id)
        .collect();
    Ok(Json(json!({
        "version": s.version,
        "source": s.source,
        "master_seed": s.config.master_seed,
        "rows": s.dataset.as_ref().map(|d| d.n_rows()),
        "signals": s.dataset.as_ref().map(|d| d.signals().to_vec()),
        "ingest": s.ingest,
        "split": s.split.as_ref().map(|i| json!({
            "boundary": format_timestamp(i.boundary),
            "n_train": i.n_train,
            "n_test": i.n_test,
            "warnings": i.warnings,
        })),
        "stages": stages,
        "stale": s.manifest.stale(),
        "awaiting_labels": s.manifest.awaiting_labels,
        "assignments": assignments,
        "active": s.active,
        "overrides": s.overrides,
        "states": s.states,
        "summary": summary,
        "running_jobs": running,
    })))
}

async fn get_embedding(State(app): State<AppState>) -> ApiResult<Json<Value>> {
    let s = app.0.state.read().await;
    let points = embedded_points(&s)?;
    let n_train = s.split_info()?.n_train;
    let dims = points.first().map_or(0, |p| p.coords.len());
    let records: Vec<Value> = points
        .into_iter()
        .map(|p| {
            json!({
                "row_id": p.row_id,
                "timestamp": format_timestamp(p.timestamp),
                "coords": p.coords,
                "split": if p.row_id < n_train { "train" } else { "test" },
            })
        })
        .collect();
    Ok(Json(json!({ "dims": dims, "points": records })))
}

#[derive(Deserialize)]
struct ClustersQuery {
    algo: Option<String>,
}

/// Labels of the training rows, in row order. `algo=states` gives the
/// practitioner's states instead of a raw assignment.
async fn get_clusters(State(app): State<AppState>, Query(q): Query<ClustersQuery>) -> ApiResult<Json<Value>> {
    let s = app.0.state.read().await;
    let Some(algo) = q.algo else {
        return Ok(Json(json!({
            "available": s.assignments.keys().collect::<Vec<_>>(),
            "active": s.active,
        })));
    };
    if algo == "states" {
        if s.states.is_empty() {
            return Err(ApiError::from(Error::NotReady("no states yet; apply labels first".into())));
        }
        let labels = state_labels(s.active_assignment()?, &s.states);
        let names: Vec<Option<String>> = labels
            .iter()
            .map(|&l| (l != NOISE).then(|| s.state_name(l)))
            .collect();
        return Ok(Json(json!({
            "algorithm": "states",
            "states": s.states,
            "labels": labels,
            "names": names,
        })));
    }
    let a = s
        .assignments
        .get(&algo)
        .ok_or_else(|| ApiError::not_found(format!("no assignment `{algo}`")))?;
    Ok(Json(json!({
        "algorithm": algo,
        "n_clusters": a.n_clusters,
        "noise": a.noise_count(),
        "labels": a.labels,
    })))
}

#[derive(Deserialize)]
struct SignalsQuery {
    rows: Option<String>,
}

/// Parses `0,5,10-20` (inclusive ranges) into sorted, de-duplicated ids.
pub fn parse_row_spec(spec: &str, n: usize) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (part, part),
        };
        let parse = |v: &str| v.parse::<usize>().map_err(|_| format!("bad row id `{v}`"));
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if lo > hi {
            return Err(format!("empty range `{part}`"));
        }
        if hi >= n {
            return Err(format!("row {hi} out of range (the dataset has {n} rows)"));
        }
        if out.len() + (hi - lo + 1) > MAX_SIGNAL_ROWS {
            return Err(format!("at most {MAX_SIGNAL_ROWS} rows per request"));
        }
        out.extend(lo..=hi);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Cleaned (band-filtered, padded) values in engineering units.
async fn get_signals(State(app): State<AppState>, Query(q): Query<SignalsQuery>) -> ApiResult<Json<Value>> {
    let s = app.0.state.read().await;
    let data = s.dataset()?;
    let spec = q.rows.ok_or_else(|| ApiError::bad_request("missing `rows`, e.g. rows=0,5,10-20"))?;
    let ids = parse_row_spec(&spec, data.n_rows()).map_err(ApiError::bad_request)?;
    let rows: Vec<Value> = ids
        .iter()
        .map(|&i| {
            json!({
                "row_id": i,
                "timestamp": format_timestamp(data.timestamps()[i]),
                "values": data.data().row(i),
            })
        })
        .collect();
    Ok(Json(json!({ "signals": data.signals(), "rows": rows })))
}

#[derive(Deserialize)]
struct ScoresQuery {
    from: Option<String>,
    to: Option<String>,
}

#[derive(Serialize)]
struct ScoreRecord<'a> {
    row_id: usize,
    timestamp: String,
    state: &'a str,
    #[serde(with = "json_f64")]
    mae: f64,
    #[serde(with = "json_f64")]
    dev: f64,
    nearest_state: &'a str,
}

/// Test-row scores with `from <= timestamp <= to`.
async fn get_scores(State(app): State<AppState>, Query(q): Query<ScoresQuery>) -> ApiResult<Response> {
    let bound = |v: &Option<String>| -> ApiResult<Option<i64>> {
        v.as_deref()
            .map(|t| parse_timestamp(t).map(|t| t.0).ok_or_else(|| ApiError::bad_request(format!("bad timestamp `{t}`"))))
            .transpose()
    };
    let (from, to) = (bound(&q.from)?, bound(&q.to)?);
    let s = app.0.state.read().await;
    if !s.manifest.is_complete(Stage::Score) {
        let stale = s.manifest.get(Stage::Score).status == StageStatus::Stale;
        return Err(ApiError::from(if stale {
            Error::Stale("scores are stale; train again".into())
        } else {
            Error::NotReady("no scores yet; train first".into())
        }));
    }
    let rows: Vec<ScoreRecord> = s
        .scores
        .iter()
        .filter(|r| from.is_none_or(|f| r.timestamp.0 >= f) && to.is_none_or(|t| r.timestamp.0 <= t))
        .map(|r| ScoreRecord {
            row_id: r.row_id,
            timestamp: format_timestamp(r.timestamp),
            state: &r.state,
            mae: r.mae,
            dev: r.dev,
            nearest_state: &r.nearest_state,
        })
        .collect();
    Ok(Json(json!({ "scores": rows })).into_response())
}

async fn post_labels(State(app): State<AppState>, Json(overrides): Json<LabelOverrides>) -> ApiResult<Json<Value>> {
    let _writer = app.claim_writer()?;
    let snapshot = app.snapshot().await;
    let mut p = app.pipeline(snapshot);
    let outcome = tokio::task::spawn_blocking(move || p.apply_labels(&overrides).map(|o| (o, p.state)))
        .await
        .map_err(|e| ApiError::from(Error::NotReady(format!("label worker failed: {e}"))))?;
    let (outcome, state) = outcome?;
    let body = match &outcome {
        LabelOutcome::AlreadyApplied => json!({ "status": "already_applied", "stale": [] }),
        LabelOutcome::Applied { stale } => json!({ "status": "applied", "stale": stale }),
    };
    *app.0.state.write().await = state;
    Ok(Json(body))
}

/// Starts voting, bank and score on a worker and answers `202` with the job.
async fn post_train(State(app): State<AppState>) -> ApiResult<Response> {
    let writer = app.claim_writer()?;
    let id = app.0.next_job.fetch_add(1, Ordering::Relaxed);
    let job = Job {
        id,
        kind: "train",
        status: JobStatus::Running,
        stage: None,
        stages_done: Vec::new(),
        error: None,
        started_at: chrono::Utc::now().to_rfc3339(),
        finished_at: None,
    };
    app.0.jobs.lock().expect("job table").insert(id, job.clone());
    let snapshot = app.snapshot().await;
    let worker = app.clone();
    tokio::spawn(async move {
        let _writer = writer;
        let progress = worker.clone();
        let mut p = worker.pipeline(snapshot);
        let result = tokio::task::spawn_blocking(move || {
            let r = train_stages(&mut p, |stage, done| {
                progress.job_update(id, |j| {
                    j.stage = stage;
                    if let Some(d) = done {
                        j.stages_done.push(d);
                    }
                })
            });
            (r, p.state)
        })
        .await;
        let finished = Some(chrono::Utc::now().to_rfc3339());
        match result {
            Ok((Ok(()), state)) => {
                *worker.0.state.write().await = state;
                worker.job_update(id, |j| {
                    j.status = JobStatus::Succeeded;
                    j.stage = None;
                    j.finished_at = finished;
                });
            }
            Ok((Err(e), state)) => {
                // completed stages were checkpointed; keep them visible
                *worker.0.state.write().await = state;
                worker.job_update(id, |j| {
                    j.status = JobStatus::Failed;
                    j.error = Some(e.to_string());
                    j.finished_at = finished;
                });
            }
            Err(e) => worker.job_update(id, |j| {
                j.status = JobStatus::Failed;
                j.error = Some(format!("training worker panicked: {e}"));
                j.finished_at = finished;
            }),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

fn train_stages(p: &mut Pipeline, mut progress: impl FnMut(Option<Stage>, Option<Stage>)) -> Result<()> {
    for stage in [Stage::Voting, Stage::Bank, Stage::Score] {
        progress(Some(stage), None);
        if p.run_until(stage)? == RunOutcome::AwaitingLabels {
            return Err(Error::NotReady("labels must be applied before training".into()));
        }
        progress(None, Some(stage));
    }
    Ok(())
}

async fn get_job(State(app): State<AppState>, UrlPath(id): UrlPath<u64>) -> ApiResult<Json<Job>> {
    app.0
        .jobs
        .lock()
        .expect("job table")
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no job {id}")))
}
