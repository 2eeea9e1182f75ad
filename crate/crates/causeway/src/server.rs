//! HTTP facade over a workspace, under `/api/v1`.
//!
//! | method | path                    | body / query                                  |
//! |--------|-------------------------|-----------------------------------------------|
//! | GET    | `/graph`                | `?version=`                                   |
//! | POST   | `/graph`                | `{"dagfile": ...}` or `{"variables", "edges"}` |
//! | POST   | `/graph/edits`          | `{"base_version"?, "edits": [...]}`           |
//! | GET    | `/implications`         | `?alpha=&statistic=&version=`                 |
//! | GET    | `/adjustment-sets`      | `?treatment=&outcome=&check=&version=`        |
//! | POST   | `/estimate`             | estimate request, `?version=`                 |
//! | POST   | `/simulate`             | `{"scenario" or "model", "n", "seed"}`        |
//! | GET    | `/reports/{id}`         |                                               |
//!
//! Every success response carries `graph_version`, `config_hash` and
//! `tool_version` at the top level. Analyses answer with
//! `{"report_id", "graph_version", "config_hash", "tool_version", "report"}`;
//! the report is the same document the CLI writes with `--out`. Graph
//! documents hash the service defaults applied to omitted parameters.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use causeway_core::graph::{CausalDag, Variable};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{self, AdjustmentRequest, AnalysisError, EstimateRequest, ImplicationsRequest};
use crate::assets;
use crate::dagfile::{self, render_dag};
use crate::report::{config_hash, Report, TOOL_VERSION};
use crate::workspace::{GraphEdit, GraphVersion, Workspace, WorkspaceError};

/// Largest sample the service will draw in one request.
pub const MAX_SIMULATED_ROWS: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    ws: Arc<Mutex<Workspace>>,
}

impl AppState {
    pub fn new(ws: Workspace) -> Self {
        AppState {
            ws: Arc::new(Mutex::new(ws)),
        }
    }

    /// All workspace mutations go through this single lock.
    fn lock(&self) -> MutexGuard<'_, Workspace> {
        self.ws.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl ToString) -> Self {
        ApiError {
            status,
            kind,
            message: message.to_string(),
        }
    }

    fn bad_request(message: impl ToString) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": {"kind": self.kind, "message": self.message},
            "tool_version": TOOL_VERSION,
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        use WorkspaceError as W;
        let (status, kind) = match &e {
            W::UnknownVersion(_) | W::UnknownReport(_) => (StatusCode::NOT_FOUND, "not-found"),
            W::StaleBase { .. } => (StatusCode::CONFLICT, "stale-version"),
            W::Graph(_) | W::SchemaChange(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid-graph"),
            W::NoData | W::NoGraph => (StatusCode::CONFLICT, "missing-input"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "workspace"),
        };
        ApiError::new(status, kind, e)
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        if e.is_input_error() {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-request", e)
        } else {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "analysis-failed", e)
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/graph", get(get_graph).post(post_graph))
        .route("/graph/edits", post(post_edits))
        .route("/implications", get(get_implications))
        .route("/adjustment-sets", get(get_adjustment_sets))
        .route("/estimate", post(post_estimate))
        .route("/simulate", post(post_simulate))
        .route("/reports/{id}", get(get_report));
    Router::new().nest("/api/v1", api).with_state(state)
}

#[derive(Debug, Serialize)]
struct VariableDoc<'a> {
    name: &'a str,
    levels: &'a [String],
    reference: &'a str,
}

/// Parameters the service applies when a request leaves them out.
fn service_defaults() -> Value {
    let e = EstimateRequest::default();
    json!({
        "implications": ImplicationsRequest::default(),
        "estimate": {"measure": e.measure, "replicates": e.replicates, "seed": e.seed, "stabilized": e.stabilized},
    })
}

fn graph_doc(v: &GraphVersion, history: &[GraphVersion]) -> Value {
    let defaults = service_defaults();
    let g = &v.graph;
    let variables: Vec<VariableDoc> = g
        .variables()
        .iter()
        .map(|x| VariableDoc {
            name: x.name(),
            levels: x.levels(),
            reference: x.reference_level(),
        })
        .collect();
    let history: Vec<Value> = history
        .iter()
        .map(|h| json!({"version": h.version, "graph_id": h.id, "note": h.note}))
        .collect();
    json!({
        "graph_version": v.version,
        "graph_id": v.id,
        "config_hash": config_hash(&defaults),
        "tool_version": TOOL_VERSION,
        "defaults": defaults,
        "note": v.note,
        "variables": variables,
        "edges": g.edges().collect::<Vec<_>>(),
        "dagfile": render_dag(g),
        "history": history,
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VersionQuery {
    version: Option<u64>,
}

async fn get_graph(State(s): State<AppState>, q: Result<Query<VersionQuery>, QueryRejection>) -> ApiResult {
    let Query(q) = q?;
    let ws = s.lock();
    let v = ws.resolve(q.version)?;
    Ok(Json(graph_doc(v, ws.history())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableInput {
    name: String,
    levels: Vec<String>,
    reference: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GraphInput {
    Text {
        dagfile: String,
    },
    Structured {
        variables: Vec<VariableInput>,
        edges: Vec<(String, String)>,
    },
}

fn build_graph(input: GraphInput) -> Result<CausalDag, ApiError> {
    let invalid = |e: &dyn ToString| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-graph", e.to_string());
    match input {
        GraphInput::Text { dagfile } => dagfile::parse_dag(&dagfile).map_err(|e| invalid(&e)),
        GraphInput::Structured { variables, edges } => {
            let vars = variables
                .into_iter()
                .map(|v| {
                    let reference = v.reference.or_else(|| v.levels.first().cloned()).unwrap_or_default();
                    Variable::new(v.name, v.levels, &reference)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid(&e))?;
            CausalDag::new(vars, edges).map_err(|e| invalid(&e))
        }
    }
}

async fn post_graph(State(s): State<AppState>, body: Result<Json<GraphInput>, JsonRejection>) -> ApiResult {
    let Json(input) = body?;
    let g = build_graph(input)?;
    let mut ws = s.lock();
    ws.commit(g, "replaced via API".into())?;
    Ok(Json(graph_doc(ws.active(), ws.history())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EditsInput {
    base_version: Option<u64>,
    edits: Vec<GraphEdit>,
}

async fn post_edits(State(s): State<AppState>, body: Result<Json<EditsInput>, JsonRejection>) -> ApiResult {
    let Json(input) = body?;
    if input.edits.is_empty() {
        return Err(ApiError::bad_request("no edits given"));
    }
    let mut ws = s.lock();
    ws.apply_edits(input.base_version, &input.edits)?;
    Ok(Json(graph_doc(ws.active(), ws.history())))
}

fn envelope(id: &str, version: Option<u64>, report: &Report) -> Json<Value> {
    Json(json!({
        "report_id": id,
        "graph_version": version,
        "config_hash": report.provenance.config_hash,
        "tool_version": TOOL_VERSION,
        "report": report,
    }))
}

/// Looks up or computes a report on a graph version. The computation runs
/// on the blocking pool without holding the workspace lock.
async fn analyse<F>(s: &AppState, version: Option<u64>, op: &str, params: String, compute: F) -> ApiResult
where
    F: FnOnce(&CausalDag, &Workspace) -> Result<Box<dyn FnOnce() -> Result<Report, AnalysisError> + Send>, ApiError>,
{
    let (v, job) = {
        let ws = s.lock();
        let gv = ws.resolve(version)?;
        if let Some(r) = ws.cached(gv.version, op, &params) {
            return Ok(envelope(&r.id(), Some(gv.version), &r));
        }
        (gv.version, compute(&gv.graph, &ws)?)
    };
    let report = tokio::task::spawn_blocking(job)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))??;
    let (id, report) = s.lock().store(v, op, &params, report)?;
    Ok(envelope(&id, Some(v), &report))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImplicationsQuery {
    version: Option<u64>,
    alpha: Option<f64>,
    statistic: Option<String>,
}

async fn get_implications(State(s): State<AppState>, q: Result<Query<ImplicationsQuery>, QueryRejection>) -> ApiResult {
    let Query(q) = q?;
    let defaults = ImplicationsRequest::default();
    let req = ImplicationsRequest {
        alpha: q.alpha.unwrap_or(defaults.alpha),
        statistic: q.statistic.unwrap_or(defaults.statistic),
    };
    let params = serde_json::to_string(&req).expect("serializes");
    analyse(&s, q.version, "implications", params, move |g, ws| {
        let (g, t) = (g.clone(), ws.data()?);
        Ok(Box::new(move || analysis::implications(&g, &t, &req)))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjustmentQuery {
    treatment: String,
    outcome: String,
    /// Comma-separated candidate set.
    check: Option<String>,
    version: Option<u64>,
}

async fn get_adjustment_sets(
    State(s): State<AppState>,
    q: Result<Query<AdjustmentQuery>, QueryRejection>,
) -> ApiResult {
    let Query(q) = q?;
    let req = AdjustmentRequest {
        treatment: q.treatment,
        outcome: q.outcome,
        check: q.check.map(|c| {
            c.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        }),
    };
    let params = serde_json::to_string(&req).expect("serializes");
    analyse(&s, q.version, "adjustment", params, move |g, _| {
        let g = g.clone();
        Ok(Box::new(move || analysis::adjustment(&g, &req)))
    })
    .await
}

async fn post_estimate(
    State(s): State<AppState>,
    q: Result<Query<VersionQuery>, QueryRejection>,
    body: Result<Json<EstimateRequest>, JsonRejection>,
) -> ApiResult {
    let (Query(q), Json(req)) = (q?, body?);
    let params = serde_json::to_string(&req).expect("serializes");
    analyse(&s, q.version, "estimate", params, move |g, ws| {
        let (g, t) = (g.clone(), ws.data()?);
        Ok(Box::new(move || analysis::estimate(&g, &t, &req)))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateInput {
    /// Name of a bundled scenario.
    scenario: Option<String>,
    /// Model text in the SCM format.
    model: Option<String>,
    n: usize,
    #[serde(default)]
    seed: u64,
}

async fn post_simulate(State(s): State<AppState>, body: Result<Json<SimulateInput>, JsonRejection>) -> ApiResult {
    let Json(input) = body?;
    let (name, m) = match (&input.scenario, &input.model) {
        (Some(name), None) => {
            let m = assets::scenario(name)
                .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not-found", format!("no scenario `{name}`")))?;
            (name.clone(), m)
        }
        (None, Some(text)) => {
            let m = dagfile::parse_scm(text)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-model", e))?;
            ("inline".to_string(), m)
        }
        _ => return Err(ApiError::bad_request("give exactly one of `scenario` and `model`")),
    };
    if input.n > MAX_SIMULATED_ROWS {
        return Err(ApiError::bad_request(format!("n is limited to {MAX_SIMULATED_ROWS}")));
    }
    let (n, seed) = (input.n, input.seed);
    let report = tokio::task::spawn_blocking(move || {
        let t = analysis::sample_parallel(&m, n, seed)?;
        Ok::<_, AnalysisError>(analysis::simulation_report(&m, &name, &t, seed, "independent rows"))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))??;
    let params = serde_json::to_string(&input).expect("serializes");
    let mut ws = s.lock();
    let version = ws.active().version;
    let (id, report) = ws.store(version, "simulate", &params, report)?;
    Ok(envelope(&id, None, &report))
}

async fn get_report(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let ws = s.lock();
    let report = ws.report(&id)?;
    let version = report.provenance.graph_id.as_deref().and_then(|g| ws.version_of(g));
    Ok(envelope(&id, version, &report))
}

/// Binds `addr`, distinguishing an occupied port from other failures.
pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|source| {
        if source.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::PortInUse(addr.port())
        } else {
            ServeError::Bind { addr, source }
        }
    })
}

/// Serves until `shutdown` resolves, then finishes in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Installs Ctrl-C and (on Unix) SIGTERM handlers and returns a future
/// that resolves when either arrives. Handlers are registered before this
/// returns, so a signal sent right after startup is not lost.
pub fn shutdown_signal() -> Result<impl std::future::Future<Output = ()> + Send + 'static, ServeError> {
    #[cfg(unix)]
    let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())?;
    let ctrl_c = tokio::spawn(tokio::signal::ctrl_c());
    Ok(async move {
        #[cfg(unix)]
        tokio::select! {
            _ = ctrl_c => {},
            _ = term.recv() => {},
        }
        #[cfg(not(unix))]
        let _ = ctrl_c.await;
    })
}
