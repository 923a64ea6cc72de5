//! HTTP service wrapping the search engine: submit runs, poll them, fetch
//! artifacts, compute oracle extrema, regenerate summaries.
//!
//! Runs execute on blocking worker threads; handlers only touch a small
//! in-memory job table. Artifacts are kept as the same text formats the
//! CLI writes to disk, so clients choose where bytes land.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use ocsearch_api::{
    ErrorBody, HealthResponse, JobState, OracleRequest, OracleResponse, ReportRequest,
    ReportResponse, RunAccepted, RunRequest, RunStatus,
};
use ocsearch_core::circuit::file::parse_circuit;
use ocsearch_core::circuit::oracle::{oracle_extrema, ExtremaFile};
use ocsearch_core::hyperspace::CircuitModel;
use ocsearch_core::planner::{run, RunConfig, RunReport};
use ocsearch_core::report::{log_csv, parse_log_csv, summary_text};

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
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

    fn conflict(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: self.message,
            }),
        )
            .into_response()
    }
}

enum Job {
    Running,
    Failed(String),
    Completed(Box<FinishedRun>),
}

struct FinishedRun {
    report: RunReport,
    log_csv: String,
    summary: String,
}

#[derive(Default)]
pub struct AppState {
    next_id: AtomicU64,
    jobs: Mutex<HashMap<u64, Job>>,
}

pub fn router() -> Router {
    router_with_state(Arc::new(AppState::default()))
}

pub fn router_with_state(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/runs", post(submit_run))
        .route("/runs/{id}", get(run_status))
        .route("/runs/{id}/wait", get(wait_run))
        .route("/runs/{id}/log.csv", get(run_log))
        .route("/runs/{id}/summary.txt", get(run_summary))
        .route("/oracle", post(oracle))
        .route("/report", post(report))
        .with_state(state)
}

/// Binds an OS-assigned loopback port and serves in a background task,
/// for clients that want a private in-process instance.
pub async fn spawn_ephemeral() -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        // The task lives until the owning runtime shuts down.
        let _ = axum::serve(listener, router()).await;
    });
    Ok((addr, handle))
}

pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

fn build_config(req: &RunRequest) -> Result<RunConfig, ApiError> {
    let model = parse_circuit(&req.circuit_toml)
        .map_err(|e| ApiError::bad_request(format!("circuit: {e}")))?;
    let mut config = RunConfig::new(model);
    let o = &req.overrides;
    if let Some(seeds) = &o.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(v) = o.fp_budget {
        config.fp_budget = v;
    }
    if let Some(v) = o.ap_iterations {
        config.ap_iterations = v;
    }
    if let Some(v) = o.eval_target {
        config.eval_target = v;
    }
    if let Some(v) = o.kappa {
        config.kappa = v;
    }
    if let Some(v) = o.jobs {
        config.jobs = v;
    }
    if let Some(cmd) = &o.simulator_command {
        config.simulator_override = Some(cmd.clone());
    }
    config
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(config)
}

async fn submit_run(
    State(state): State<Arc<AppState>>,
    Json(req): Json<RunRequest>,
) -> Result<(StatusCode, Json<RunAccepted>), ApiError> {
    let config = build_config(&req)?;
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    state
        .jobs
        .lock()
        .expect("job table lock")
        .insert(id, Job::Running);
    let state_for_job = state.clone();
    tokio::task::spawn_blocking(move || {
        let model = config.model.clone();
        let outcome = match run(&config) {
            Ok(report) => match summary_text(&model, &report, None) {
                Ok(summary) => Job::Completed(Box::new(FinishedRun {
                    log_csv: log_csv(&model, &report),
                    summary,
                    report,
                })),
                Err(e) => Job::Failed(format!("summarizing run: {e}")),
            },
            Err(e) => Job::Failed(e.to_string()),
        };
        state_for_job
            .jobs
            .lock()
            .expect("job table lock")
            .insert(id, outcome);
    });
    Ok((StatusCode::ACCEPTED, Json(RunAccepted { id })))
}

fn status_of(state: &AppState, id: u64) -> Result<RunStatus, ApiError> {
    let jobs = state.jobs.lock().expect("job table lock");
    let job = jobs
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no run with id {id}")))?;
    Ok(match job {
        Job::Running => RunStatus {
            id,
            state: JobState::Running,
            error: None,
            violations_found: None,
            total_simulations: None,
            completed_seeds: None,
            failed_seeds: None,
        },
        Job::Failed(message) => RunStatus {
            id,
            state: JobState::Failed,
            error: Some(message.clone()),
            violations_found: None,
            total_simulations: None,
            completed_seeds: None,
            failed_seeds: None,
        },
        Job::Completed(done) => RunStatus {
            id,
            state: JobState::Completed,
            error: None,
            violations_found: Some(done.report.any_violation()),
            total_simulations: Some(done.report.total_simulations()),
            completed_seeds: Some(done.report.completed.len()),
            failed_seeds: Some(done.report.failed.len()),
        },
    })
}

async fn run_status(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Json<RunStatus>, ApiError> {
    status_of(&state, id).map(Json)
}

#[derive(Deserialize)]
struct WaitParams {
    #[serde(default = "default_wait")]
    timeout_secs: f64,
}

fn default_wait() -> f64 {
    30.0
}

/// Long poll: returns as soon as the job leaves the running state, or with
/// the current state after the timeout.
async fn wait_run(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(params): Query<WaitParams>,
) -> Result<Json<RunStatus>, ApiError> {
    let deadline = tokio::time::Instant::now()
        + Duration::from_secs_f64(params.timeout_secs.clamp(0.0, 600.0));
    loop {
        let status = status_of(&state, id)?;
        if status.state != JobState::Running || tokio::time::Instant::now() >= deadline {
            return Ok(Json(status));
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

fn finished_artifact(
    state: &AppState,
    id: u64,
    pick: impl Fn(&FinishedRun) -> String,
) -> Result<String, ApiError> {
    let jobs = state.jobs.lock().expect("job table lock");
    match jobs.get(&id) {
        None => Err(ApiError::not_found(format!("no run with id {id}"))),
        Some(Job::Running) => Err(ApiError::conflict(format!("run {id} is still running"))),
        Some(Job::Failed(message)) => Err(ApiError::conflict(format!("run {id} failed: {message}"))),
        Some(Job::Completed(done)) => Ok(pick(done)),
    }
}

async fn run_log(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Response, ApiError> {
    let body = finished_artifact(&state, id, |d| d.log_csv.clone())?;
    Ok(([("content-type", "text/csv; charset=utf-8")], body).into_response())
}

async fn run_summary(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Response, ApiError> {
    let body = finished_artifact(&state, id, |d| d.summary.clone())?;
    Ok(([("content-type", "text/plain; charset=utf-8")], body).into_response())
}

fn parse_model(circuit_toml: &str) -> Result<CircuitModel, ApiError> {
    parse_circuit(circuit_toml).map_err(|e| ApiError::bad_request(format!("circuit: {e}")))
}

async fn oracle(Json(req): Json<OracleRequest>) -> Result<Json<OracleResponse>, ApiError> {
    let model = parse_model(&req.circuit_toml)?;
    if !model.backend.is_synthetic() {
        return Err(ApiError::bad_request(
            "oracle extrema require a synthetic backend; this circuit uses an external simulator",
        ));
    }
    let density = req.density;
    let result = tokio::task::spawn_blocking(move || {
        oracle_extrema(&model, density).map(|r| ExtremaFile::from_result(&model, &r))
    })
    .await
    .map_err(|e| ApiError::internal(format!("oracle task: {e}")))?
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(OracleResponse {
        extrema_toml: result.to_toml(),
    }))
}

async fn report(Json(req): Json<ReportRequest>) -> Result<Json<ReportResponse>, ApiError> {
    let model = parse_model(&req.circuit_toml)?;
    let rebuilt = parse_log_csv(&model, &req.log_csv)
        .map_err(|e| ApiError::bad_request(format!("log: {e}")))?;
    let extrema = match &req.extrema_toml {
        Some(text) => Some(
            ExtremaFile::from_toml(text)
                .map_err(|e| ApiError::bad_request(format!("extrema: {e}")))?,
        ),
        None => None,
    };
    let summary = summary_text(&model, &rebuilt, extrema.as_ref())
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(ReportResponse { summary }))
}
