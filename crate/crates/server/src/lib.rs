//! HTTP/JSON API over the workbench: dataset upload, experiment
//! lifecycle, progressive results and parameter suggestion.

mod query;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use putwb_core::dataset::{self, CleanOptions, Violation};
use putwb_core::digest::sha256_hex;
use putwb_core::engine::{
    parse_dataset, run_experiment, DataFormat, ExperimentSpec, ExperimentStatus, PreparedExperiment, RunObserver,
    RunState, TaskFailure, TaskRecord,
};
use putwb_core::genset::PlanReport;
use putwb_core::learners::LearnerKind;
use putwb_core::putmodel::DEFAULT_BUDGET_CAP;
use putwb_core::tools::{autopilot, AutopilotOptions};
use putwb_core::{AttributeKind, Dataset, Error, PutConfig, SizeSpec};

pub use query::{RangeFilter, ResultQuery, MAX_LIMIT};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub max_body_bytes: usize,
    /// Required as `Authorization: Bearer <token>` when set.
    pub token: Option<String>,
    /// Served for paths no API route matches.
    pub static_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            max_body_bytes: 512 << 20,
            token: None,
            static_dir: None,
            workers: None,
        }
    }
}

/// Binding beyond loopback needs a token.
pub fn check_bind(addr: &SocketAddr, token: Option<&str>) -> Result<(), String> {
    if addr.ip().is_loopback() || token.is_some_and(|t| !t.is_empty()) {
        Ok(())
    } else {
        Err(format!("binding {addr} is not loopback; an access token is required"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AttributeSummary {
    pub index: u32,
    pub name: String,
    pub kind: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub id: String,
    pub digest: String,
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub class_labels: Vec<String>,
    pub class_histogram: Vec<usize>,
    pub attributes: Vec<AttributeSummary>,
    pub has_missing: bool,
}

struct StoredDataset {
    dataset: Arc<Dataset>,
    summary: DatasetSummary,
}

struct Live {
    status: ExperimentStatus,
    report: Option<PlanReport>,
    results: Vec<TaskRecord>,
    failures: Vec<TaskFailure>,
}

struct Experiment {
    id: String,
    dataset_id: String,
    spec: ExperimentSpec,
    class_count: usize,
    control: putwb_core::engine::Control,
    live: RwLock<Live>,
}

struct Inner {
    config: ServerConfig,
    datasets: RwLock<HashMap<String, StoredDataset>>,
    experiments: RwLock<HashMap<String, Arc<Experiment>>>,
    next_id: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState(Arc::new(Inner {
            config,
            datasets: RwLock::new(HashMap::new()),
            experiments: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }))
    }

    fn experiment(&self, id: &str) -> Result<Arc<Experiment>, ApiError> {
        self.0
            .experiments
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no experiment `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    violations: Vec<Violation>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            violations: Vec::new(),
        }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let violations = match &e {
            Error::Engine(putwb_core::engine::EngineError::InvalidDataset(v)) => v.clone(),
            _ => Vec::new(),
        };
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: e.to_string(),
            violations,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if !self.violations.is_empty() {
            body["violations"] = serde_json::to_value(&self.violations).unwrap();
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let limit = state.0.config.max_body_bytes;
    let static_dir = state.0.config.static_dir.clone();
    let api = Router::new()
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/datasets/{id}", get(get_dataset))
        .route("/experiments", post(start_experiment).get(list_experiments))
        .route("/experiments/{id}/status", get(experiment_status))
        .route("/experiments/{id}/pause", post(pause_experiment))
        .route("/experiments/{id}/resume", post(resume_experiment))
        .route("/experiments/{id}/cancel", post(cancel_experiment))
        .route("/experiments/{id}/results", get(experiment_results))
        .route("/autopilot", post(suggest));
    let mut app = api
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    if let Some(dir) = static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    app
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.config.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong access token").into_response();
        }
    }
    next.run(req).await
}

/// Serves until the process ends.
pub async fn serve(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    check_bind(&addr, config.token.as_deref())
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::PermissionDenied, e))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await
}

/// [`serve`] on a runtime of its own.
pub fn serve_blocking(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, config))
}

fn summarize(id: &str, digest: &str, ds: &Dataset) -> DatasetSummary {
    DatasetSummary {
        id: id.to_string(),
        digest: digest.to_string(),
        name: ds.source_name.clone(),
        n: ds.n(),
        m: ds.m(),
        class_labels: ds.class.labels.clone(),
        class_histogram: ds.class_histogram(),
        attributes: ds
            .attributes
            .iter()
            .map(|a| AttributeSummary {
                index: a.index,
                name: a.name.clone(),
                kind: match a.kind {
                    AttributeKind::Nominal(_) => "nominal",
                    AttributeKind::Numeric => "numeric",
                },
            })
            .collect(),
        has_missing: ds.has_missing(),
    }
}

async fn upload_dataset(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Json<DatasetSummary>> {
    let format = match params.get("format").map(String::as_str) {
        None => None,
        Some("arff") => Some(DataFormat::Arff),
        Some("csv") => Some(DataFormat::Csv),
        Some(other) => return Err(ApiError::bad(format!("unknown format `{other}`"))),
    };
    let digest = sha256_hex(&body);
    let id = digest[..16].to_string();
    if let Some(d) = state.0.datasets.read().unwrap().get(&id) {
        return Ok(Json(d.summary.clone()));
    }
    let class = params.get("class").cloned();
    let name = params.get("name").cloned().unwrap_or_else(|| "upload".into());
    let ds = tokio::task::spawn_blocking(move || parse_dataset(&body, format, class.as_deref(), &name))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let violations = dataset::validate(&ds);
    if !violations.is_empty() {
        return Err(ApiError {
            status: StatusCode::BAD_REQUEST,
            message: "dataset is not usable".into(),
            violations,
        });
    }
    let summary = summarize(&id, &digest, &ds);
    state.0.datasets.write().unwrap().insert(
        id,
        StoredDataset {
            dataset: Arc::new(ds),
            summary: summary.clone(),
        },
    );
    Ok(Json(summary))
}

async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetSummary>> {
    let mut v: Vec<DatasetSummary> = state
        .0
        .datasets
        .read()
        .unwrap()
        .values()
        .map(|d| d.summary.clone())
        .collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    Json(v)
}

async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DatasetSummary>> {
    state
        .0
        .datasets
        .read()
        .unwrap()
        .get(&id)
        .map(|d| Json(d.summary.clone()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no dataset `{id}`")))
}

fn default_cap() -> Option<u64> {
    Some(DEFAULT_BUDGET_CAP)
}

#[derive(Debug, Deserialize)]
struct StartRequest {
    dataset_id: String,
    config: PutConfig,
    #[serde(default)]
    clean: CleanOptions,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default = "default_cap")]
    budget_cap: Option<u64>,
    #[serde(default)]
    record_timing: Option<bool>,
    /// Optional file backing: checkpoint and result CSV paths.
    #[serde(default)]
    checkpoint: Option<PathBuf>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    checkpoint_interval: Option<u64>,
}

#[derive(Serialize)]
struct ExperimentView {
    id: String,
    dataset_id: String,
    status: ExperimentStatus,
    report: Option<PlanReport>,
    spec: ExperimentSpec,
}

impl Experiment {
    fn view(&self) -> ExperimentView {
        let live = self.live.read().unwrap();
        ExperimentView {
            id: self.id.clone(),
            dataset_id: self.dataset_id.clone(),
            status: live.status.clone(),
            report: live.report.clone(),
            spec: self.spec.clone(),
        }
    }
}

/// Mirrors collector callbacks into the shared experiment record.
struct LiveObserver(Arc<Experiment>);

impl LiveObserver {
    fn counts(live: &mut Live, s: &ExperimentStatus) {
        live.status.done = s.done;
        live.status.total = s.total;
        live.status.failed = s.failed;
        live.status.elapsed_s = s.elapsed_s;
        live.status.eta_s = s.eta_s;
        live.status.last_error = s.last_error.clone();
    }
}

impl RunObserver for LiveObserver {
    fn started(&mut self, s: &ExperimentStatus, report: &PlanReport) {
        let mut live = self.0.live.write().unwrap();
        Self::counts(&mut live, s);
        live.report = Some(report.clone());
        if live.status.state == RunState::Pending {
            live.status.state = RunState::Running;
        }
    }
    fn committed(&mut self, r: &TaskRecord, s: &ExperimentStatus) {
        let mut live = self.0.live.write().unwrap();
        live.results.push(r.clone());
        Self::counts(&mut live, s);
    }
    fn failed(&mut self, f: &TaskFailure, s: &ExperimentStatus) {
        let mut live = self.0.live.write().unwrap();
        live.failures.push(f.clone());
        Self::counts(&mut live, s);
    }
    fn state_changed(&mut self, s: &ExperimentStatus) {
        let mut live = self.0.live.write().unwrap();
        Self::counts(&mut live, s);
        if !live.status.state.is_terminal() || s.state.is_terminal() {
            live.status.state = s.state;
        }
    }
}

async fn start_experiment(
    State(state): State<AppState>,
    Json(req): Json<StartRequest>,
) -> ApiResult<(StatusCode, Json<ExperimentView>)> {
    let ds = state
        .0
        .datasets
        .read()
        .unwrap()
        .get(&req.dataset_id)
        .map(|d| (d.dataset.clone(), d.summary.clone()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no dataset `{}`", req.dataset_id)))?;
    let busy = state
        .0
        .experiments
        .read()
        .unwrap()
        .values()
        .any(|e| e.dataset_id == req.dataset_id && !e.live.read().unwrap().status.state.is_terminal());
    if busy {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "an experiment on this dataset is still running",
        ));
    }
    let mut spec = ExperimentSpec::new(&ds.1.name, req.config);
    spec.clean = req.clean;
    spec.workers = req.workers.or(state.0.config.workers);
    spec.budget_cap = req.budget_cap;
    spec.record_timing = req.record_timing.unwrap_or(true);
    spec.checkpoint = req.checkpoint;
    spec.output = req.output;
    if let Some(i) = req.checkpoint_interval {
        spec.checkpoint_interval = i;
    }
    let prep = {
        let (dataset, digest) = (ds.0, ds.1.digest);
        tokio::task::spawn_blocking(move || PreparedExperiment::from_dataset(spec, dataset, digest))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??
    };
    let id = format!("e{}", state.0.next_id.fetch_add(1, Ordering::SeqCst));
    let exp = Arc::new(Experiment {
        id: id.clone(),
        dataset_id: req.dataset_id,
        spec: prep.spec.clone(),
        class_count: prep.dataset.class_count(),
        control: putwb_core::engine::Control::new(),
        live: RwLock::new(Live {
            status: ExperimentStatus::pending(prep.plan.budget),
            report: None,
            results: Vec::new(),
            failures: Vec::new(),
        }),
    });
    state.0.experiments.write().unwrap().insert(id.clone(), exp.clone());
    {
        let exp = exp.clone();
        std::thread::spawn(move || {
            let mut observer = LiveObserver(exp.clone());
            let outcome = run_experiment(&prep, &exp.control, &mut observer);
            let mut live = exp.live.write().unwrap();
            match outcome {
                Ok(o) => {
                    live.status = o.status;
                    live.report = Some(o.report);
                }
                Err(e) => {
                    log::warn!("experiment {} failed: {e}", exp.id);
                    live.status.state = RunState::Failed;
                    live.status.last_error = Some(e.to_string());
                }
            }
        });
    }
    Ok((StatusCode::CREATED, Json(exp.view())))
}

async fn list_experiments(State(state): State<AppState>) -> Json<Vec<ExperimentView>> {
    let mut v: Vec<ExperimentView> = state.0.experiments.read().unwrap().values().map(|e| e.view()).collect();
    v.sort_by_key(|e| e.id[1..].parse::<u64>().unwrap_or(0));
    Json(v)
}

async fn experiment_status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ExperimentView>> {
    Ok(Json(state.experiment(&id)?.view()))
}

fn transition(
    state: &AppState,
    id: &str,
    allowed: &[RunState],
    to: RunState,
    act: impl FnOnce(&putwb_core::engine::Control),
) -> ApiResult<Json<ExperimentView>> {
    let exp = state.experiment(id)?;
    {
        let mut live = exp.live.write().unwrap();
        let from = live.status.state;
        if !allowed.contains(&from) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("cannot move experiment from {from:?} to {to:?}"),
            ));
        }
        act(&exp.control);
        live.status.state = to;
    }
    Ok(Json(exp.view()))
}

async fn pause_experiment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ExperimentView>> {
    transition(
        &state,
        &id,
        &[RunState::Pending, RunState::Running],
        RunState::Paused,
        |c| {
            c.pause();
        },
    )
}

async fn resume_experiment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ExperimentView>> {
    transition(&state, &id, &[RunState::Paused], RunState::Running, |c| {
        c.resume();
    })
}

async fn cancel_experiment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ExperimentView>> {
    transition(
        &state,
        &id,
        &[RunState::Pending, RunState::Running, RunState::Paused],
        RunState::Cancelled,
        |c| c.cancel(),
    )
}

#[derive(Serialize)]
struct ResultPage<'a> {
    /// Pass back as `snapshot` to page over the same committed prefix.
    snapshot: usize,
    committed: usize,
    total: usize,
    offset: usize,
    class_count: usize,
    state: RunState,
    rows: Vec<&'a TaskRecord>,
}

async fn experiment_results(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let exp = state.experiment(&id)?;
    let q = ResultQuery::from_params(&params).map_err(ApiError::bad)?;
    let live = exp.live.read().unwrap();
    let committed = live.results.len();
    let snapshot = q.snapshot.unwrap_or(committed);
    if snapshot > committed {
        return Err(ApiError::bad(format!(
            "snapshot {snapshot} is ahead of the {committed} committed results"
        )));
    }
    let (total, rows) = q.apply(&live.results[..snapshot]);
    let page = ResultPage {
        snapshot,
        committed,
        total,
        offset: q.offset,
        class_count: exp.class_count,
        state: live.status.state,
        rows,
    };
    Ok(Json(page).into_response())
}

#[derive(Debug, Deserialize)]
struct AutopilotRequest {
    dataset_id: String,
    size: SizeSpec,
    #[serde(default)]
    learner: Option<LearnerKind>,
    #[serde(default)]
    options: Option<AutopilotOptions>,
}

async fn suggest(State(state): State<AppState>, Json(req): Json<AutopilotRequest>) -> ApiResult<Response> {
    let ds = state
        .0
        .datasets
        .read()
        .unwrap()
        .get(&req.dataset_id)
        .map(|d| d.dataset.clone())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no dataset `{}`", req.dataset_id)))?;
    let learner = req.learner.unwrap_or_else(LearnerKind::tree);
    let options = req.options.unwrap_or_default();
    let s = tokio::task::spawn_blocking(move || autopilot(&ds, req.size, &learner, &options))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(s).into_response())
}
