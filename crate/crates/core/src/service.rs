//! Local HTTP/JSON API over refinement sessions, versioned under `/v1`.
//!
//! Sessions live in memory under random 128-bit ids. Each session sits
//! behind its own async mutex, so requests on one session run one at a
//! time while distinct sessions proceed in parallel. CPU-heavy actions run
//! on the blocking pool with the session lock held.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::ingest::{self, IndexBase, Report, Timing};
use crate::model::{Comparison, ReachabilityProperty, StateId};
use crate::scc::{NodeId, ViewError, ViewVertex};
use crate::search::{Budget, SearchConfig, SearchMethod};
use crate::session::{RefinePolicy, RefinementSession, SessionDocument, SessionError, SessionStatus};
use crate::subsystem::EdgeMode;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    /// Directory searched for `<name>.tra` / `<name>.lab` when a request names a model.
    pub model_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            session_ttl: Duration::from_secs(3600),
            model_dir: None,
        }
    }
}

struct Slot {
    session: Arc<tokio::sync::Mutex<RefinementSession>>,
    last_used: Mutex<Instant>,
}

impl Slot {
    fn touch(&self) {
        *self.last_used.lock().expect("poisoned") = Instant::now();
    }
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Slot>>>>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            sessions: Arc::default(),
            config: Arc::new(config),
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&self, session: RefinementSession) -> String {
        let id = format!("{:032x}", rand::random::<u128>());
        let slot = Slot {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            last_used: Mutex::new(Instant::now()),
        };
        self.sessions.write().expect("poisoned").insert(id.clone(), Arc::new(slot));
        id
    }

    fn get(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        let slot = self
            .sessions
            .read()
            .expect("poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))?;
        slot.touch();
        Ok(slot)
    }

    /// Evicts sessions idle for longer than `ttl` as of `now`. Sessions with a
    /// request in flight are skipped.
    pub fn session_gc_at(&self, now: Instant, ttl: Duration) -> Vec<String> {
        let mut sessions = self.sessions.write().expect("poisoned");
        let stale: Vec<String> = sessions
            .iter()
            .filter(|(_, slot)| {
                let idle = now.saturating_duration_since(*slot.last_used.lock().expect("poisoned"));
                idle > ttl && Arc::strong_count(slot) == 1 && slot.session.try_lock().is_ok()
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in &stale {
            sessions.remove(id);
            tracing::info!(session = %id, "evicted idle session");
        }
        stale
    }

    pub fn session_gc(&self) -> Vec<String> {
        self.session_gc_at(Instant::now(), self.config.session_ttl)
    }
}

/// Runs `f` on the session with its lock held, off the async executor.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut RefinementSession) -> Result<T, ApiError> + Send + 'static,
{
    let slot = state.get(id)?;
    let mut guard = Arc::clone(&slot.session).lock_owned().await;
    let out = tokio::task::spawn_blocking(move || f(&mut guard))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    slot.touch();
    out
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Holds(f64),
    Internal(String),
}

/// Error payload for every non-2xx answer except 422.
#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, message) = match self {
            ApiError::Holds(prob) => {
                return (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({ "verdict": "holds", "prob": prob }))).into_response();
            }
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, format!("unknown session `{id}`")),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (code, Json(ErrorBody { error: message })).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::Model(_) | SessionError::Parse(_) | SessionError::Document(_) => ApiError::BadRequest(msg),
            SessionError::View(ViewError::UnknownNode(_)) => ApiError::BadRequest(msg),
            SessionError::View(ViewError::ParentCollapsed { .. })
            | SessionError::NotApplicable { .. }
            | SessionError::EmptyHistory
            | SessionError::SearchFailed => ApiError::Conflict(msg),
            SessionError::View(ViewError::Solve(_))
            | SessionError::Check(_)
            | SessionError::Search(_)
            | SessionError::Subsystem(_) => ApiError::Internal(msg),
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

/// Body of `POST /v1/sessions`. Give either inline `tra` + `lab` text or
/// the `model` name of a file pair in the service's model directory.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub tra: Option<String>,
    #[serde(default)]
    pub lab: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub one_based: bool,
    pub property: ReachabilityProperty,
    #[serde(default)]
    pub method: SearchMethod,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub edge_mode: EdgeMode,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct ConcretizeRequest {
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, JsonSchema)]
pub struct RefineRequest {
    #[serde(default)]
    pub policy: RefinePolicy,
}

/// Answer to every state-changing action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionSummary {
    pub id: String,
    pub status: SessionStatus,
    pub model_prob: f64,
    pub prob: f64,
    pub steps: usize,
    pub history_len: usize,
}

fn summary(id: &str, s: &RefinementSession) -> SessionSummary {
    SessionSummary {
        id: id.to_string(),
        status: s.status(),
        model_prob: s.verdict().prob(),
        prob: s.subsystem_prob(),
        steps: s.last_steps(),
        history_len: s.history().len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VertexDto {
    pub id: usize,
    #[serde(flatten)]
    pub vertex: ViewVertex,
    /// Concrete states this vertex stands for.
    pub covered: Vec<StateId>,
    pub labels: Vec<String>,
    pub initial: bool,
    pub in_subsystem: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EdgeDto {
    pub src: usize,
    pub dst: usize,
    pub prob: f64,
    pub in_subsystem: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Gauge {
    pub prob: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NodeDto {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub members: Vec<StateId>,
    pub inputs: Vec<StateId>,
    pub children: Vec<NodeId>,
    pub expanded: bool,
}

/// Projection of the current view and subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ViewDto {
    pub vertices: Vec<VertexDto>,
    pub edges: Vec<EdgeDto>,
    pub gauge: Gauge,
    pub nodes: Vec<NodeDto>,
}

pub fn view_dto(session: &RefinementSession) -> ViewDto {
    let prop = session.property();
    let gauge = Gauge {
        prob: session.subsystem_prob(),
        threshold: prop.threshold,
        comparison: prop.comparison,
        status: session.status(),
    };
    let (Some(view), Some(h)) = (session.view(), session.hierarchy_opt()) else {
        return ViewDto {
            vertices: Vec::new(),
            edges: Vec::new(),
            gauge,
            nodes: Vec::new(),
        };
    };
    let sub = session.subsystem();
    let g = view.graph();
    let vertices = (0..view.num_vertices())
        .map(|v| {
            let vertex = view.vertex(v);
            let covered = match vertex {
                ViewVertex::Concrete { state } => vec![state],
                ViewVertex::Abstract { node, .. } => h.nodes()[node].members.clone(),
            };
            VertexDto {
                id: v,
                vertex,
                covered,
                labels: g.labels_of(v).into_iter().map(String::from).collect(),
                initial: v == view.initial(),
                in_subsystem: sub.contains(v),
            }
        })
        .collect();
    let edges = g
        .transitions()
        .map(|(src, dst, prob)| EdgeDto {
            src,
            dst,
            prob,
            in_subsystem: sub.has_edge(src, dst),
        })
        .collect();
    let expanded = view.expanded();
    let nodes = h
        .nodes()
        .iter()
        .map(|n| NodeDto {
            id: n.id,
            parent: n.parent,
            depth: n.depth,
            members: n.members.clone(),
            inputs: n.inputs.clone(),
            children: n.children.clone(),
            expanded: expanded.contains(&n.id),
        })
        .collect();
    ViewDto {
        vertices,
        edges,
        gauge,
        nodes,
    }
}

fn valid_model_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && !name.starts_with('.')
}

fn load_model(req: &CreateSessionRequest, dir: Option<&Path>) -> Result<crate::model::Dtmc, ApiError> {
    let base = if req.one_based { IndexBase::One } else { IndexBase::Zero };
    let (tra, lab) = match (&req.tra, &req.lab, &req.model) {
        (Some(tra), Some(lab), None) => (tra.clone(), lab.clone()),
        (None, None, Some(name)) => {
            let dir = dir.ok_or_else(|| ApiError::BadRequest("no model directory configured".into()))?;
            if !valid_model_name(name) {
                return Err(ApiError::BadRequest(format!("invalid model name `{name}`")));
            }
            let read = |ext: &str| {
                std::fs::read_to_string(dir.join(format!("{name}.{ext}")))
                    .map_err(|e| ApiError::BadRequest(format!("model `{name}`: {e}")))
            };
            (read("tra")?, read("lab")?)
        }
        _ => return Err(ApiError::BadRequest("give either `tra` and `lab`, or `model`".into())),
    };
    let bad = |e: ingest::ParseError| ApiError::BadRequest(e.to_string());
    let model = ingest::parse_tra_str(&tra, base).map_err(bad)?;
    ingest::parse_lab_str(&lab, model, base).map_err(bad)
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let config = SearchConfig {
        method: req.method,
        budget: req.budget,
        edge_mode: req.edge_mode,
    };
    let dir = state.config.model_dir.clone();
    let session = tokio::task::spawn_blocking(move || {
        let model = load_model(&req, dir.as_deref())?;
        RefinementSession::create(Arc::new(model), req.property, config).map_err(ApiError::from)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    admit(&state, session)
}

async fn import_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let doc: SessionDocument = parse_body(&body)?;
    let session = tokio::task::spawn_blocking(move || RefinementSession::import(&doc).map_err(ApiError::from))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    admit(&state, session)
}

fn admit(state: &AppState, session: RefinementSession) -> Result<Response, ApiError> {
    if session.status() == SessionStatus::Satisfied {
        return Err(ApiError::Holds(session.verdict().prob()));
    }
    let sum = summary("", &session);
    let id = state.insert(session);
    tracing::info!(session = %id, "created session");
    Ok((StatusCode::CREATED, Json(SessionSummary { id, ..sum })).into_response())
}

async fn get_view(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<ViewDto>, ApiError> {
    with_session(&state, &id, |s| Ok(view_dto(s))).await.map(Json)
}

async fn search(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionSummary>, ApiError> {
    let key = id.clone();
    with_session(&state, &id, move |s| {
        s.run_search()?;
        Ok(summary(&key, s))
    })
    .await
    .map(Json)
}

async fn concretize(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<SessionSummary>, ApiError> {
    let req: ConcretizeRequest = parse_body(&body)?;
    let key = id.clone();
    with_session(&state, &id, move |s| {
        s.concretize(&req.nodes)?;
        Ok(summary(&key, s))
    })
    .await
    .map(Json)
}

async fn refine(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<SessionSummary>, ApiError> {
    let req: RefineRequest = if body.is_empty() { RefineRequest::default() } else { parse_body(&body)? };
    let key = id.clone();
    with_session(&state, &id, move |s| {
        s.auto_refine(req.policy)?;
        Ok(summary(&key, s))
    })
    .await
    .map(Json)
}

async fn undo(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionSummary>, ApiError> {
    let key = id.clone();
    with_session(&state, &id, move |s| {
        s.undo()?;
        Ok(summary(&key, s))
    })
    .await
    .map(Json)
}

async fn reset(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionSummary>, ApiError> {
    let key = id.clone();
    with_session(&state, &id, move |s| {
        s.reset()?;
        Ok(summary(&key, s))
    })
    .await
    .map(Json)
}

#[derive(Debug, Default, Deserialize)]
struct ReportQuery {
    #[serde(default)]
    deterministic: bool,
}

async fn report(State(state): State<AppState>, UrlPath(id): UrlPath<String>, Query(q): Query<ReportQuery>) -> Result<Json<Report>, ApiError> {
    let timing = if q.deterministic { Timing::Fixed } else { Timing::Measured };
    with_session(&state, &id, move |s| Ok(Report::from_session(s, timing))).await.map(Json)
}

async fn export(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionDocument>, ApiError> {
    with_session(&state, &id, |s| Ok(s.export())).await.map(Json)
}

async fn delete_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.write().expect("poisoned").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(id)),
    }
}

async fn schema() -> Json<serde_json::Value> {
    Json(json!({
        "version": "v1",
        "CreateSessionRequest": schemars::schema_for!(CreateSessionRequest),
        "ConcretizeRequest": schemars::schema_for!(ConcretizeRequest),
        "RefineRequest": schemars::schema_for!(RefineRequest),
        "SessionSummary": schemars::schema_for!(SessionSummary),
        "ViewDto": schemars::schema_for!(ViewDto),
        "Report": schemars::schema_for!(Report),
        "SessionDocument": schemars::schema_for!(SessionDocument),
        "ErrorBody": schemars::schema_for!(ErrorBody),
    }))
}

/// Accepts `http(s)://localhost`, `127.0.0.1` and `[::1]` with any port.
pub fn is_local_origin(origin: &[u8]) -> bool {
    let Ok(origin) = std::str::from_utf8(origin) else { return false };
    let Some(rest) = origin.strip_prefix("http://").or_else(|| origin.strip_prefix("https://")) else {
        return false;
    };
    let host = match rest.strip_prefix("[::1]") {
        Some(port) => return port.is_empty() || port.strip_prefix(':').is_some_and(|p| p.parse::<u16>().is_ok()),
        None => rest,
    };
    let (host, port) = host.split_once(':').map_or((host, None), |(h, p)| (h, Some(p)));
    matches!(host, "localhost" | "127.0.0.1") && port.is_none_or(|p| p.parse::<u16>().is_ok())
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin: &HeaderValue, _| is_local_origin(origin.as_bytes())))
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    Router::new()
        .route("/v1/schema", get(schema))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/import", post(import_session))
        .route("/v1/sessions/{id}", axum::routing::delete(delete_session))
        .route("/v1/sessions/{id}/view", get(get_view))
        .route("/v1/sessions/{id}/search", post(search))
        .route("/v1/sessions/{id}/concretize", post(concretize))
        .route("/v1/sessions/{id}/refine", post(refine))
        .route("/v1/sessions/{id}/undo", post(undo))
        .route("/v1/sessions/{id}/reset", post(reset))
        .route("/v1/sessions/{id}/report", get(report))
        .route("/v1/sessions/{id}/export", get(export))
        .layer(cors)
        .with_state(state)
}

/// Serves until Ctrl-C, evicting idle sessions in the background.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");

    let gc_state = state.clone();
    let period = (state.config.session_ttl / 4).max(Duration::from_secs(1));
    let gc = tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            gc_state.session_gc();
        }
    });
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    gc.abort();
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::d1;
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    fn d1_body(threshold: f64) -> String {
        let m = d1();
        json!({
            "tra": ingest::tra_string(&m, IndexBase::Zero),
            "lab": ingest::lab_string(&m, IndexBase::Zero),
            "property": { "comparison": "le", "threshold": threshold, "target_label": "goal" },
        })
        .to_string()
    }

    async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, serde_json::Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map(Body::from).unwrap_or_else(Body::empty))
            .unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { serde_json::Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    #[tokio::test]
    async fn create_search_view() {
        let app = router(AppState::new(ServiceConfig::default()));
        let (code, body) = call(&app, "POST", "/v1/sessions", Some(d1_body(0.25))).await;
        assert_eq!(code, StatusCode::CREATED);
        assert_eq!(body["status"], "searching");
        let id = body["id"].as_str().unwrap().to_string();
        assert_eq!(id.len(), 32);

        let (code, body) = call(&app, "POST", &format!("/v1/sessions/{id}/search"), None).await;
        assert_eq!(code, StatusCode::OK);
        assert_eq!(body["status"], "critical");

        let (_, view) = call(&app, "GET", &format!("/v1/sessions/{id}/view"), None).await;
        let view: ViewDto = serde_json::from_value(view).unwrap();
        assert_eq!(crate::fmt_prob(view.gauge.prob), "0.333333");
        assert_eq!(view.gauge.status, SessionStatus::Critical);
        assert_eq!(view.vertices.len(), 3);
        assert!(view.vertices[0].vertex.is_abstract());
        assert_eq!(view.vertices[0].covered, vec![0, 1]);
    }

    #[tokio::test]
    async fn holds_gives_422() {
        let app = router(AppState::new(ServiceConfig::default()));
        let (code, body) = call(&app, "POST", "/v1/sessions", Some(d1_body(0.5))).await;
        assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(body["verdict"], "holds");
        assert!((body["prob"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[tokio::test]
    async fn error_statuses() {
        let app = router(AppState::new(ServiceConfig::default()));
        let (code, _) = call(&app, "POST", "/v1/sessions", Some("{".into())).await;
        assert_eq!(code, StatusCode::BAD_REQUEST);
        let (code, _) = call(&app, "POST", "/v1/sessions", Some(json!({"property": 1}).to_string())).await;
        assert_eq!(code, StatusCode::BAD_REQUEST);
        let (code, _) = call(&app, "GET", "/v1/sessions/nope/view", None).await;
        assert_eq!(code, StatusCode::NOT_FOUND);

        let (_, body) = call(&app, "POST", "/v1/sessions", Some(d1_body(0.25))).await;
        let id = body["id"].as_str().unwrap().to_string();
        let (code, _) = call(&app, "POST", &format!("/v1/sessions/{id}/undo"), None).await;
        assert_eq!(code, StatusCode::CONFLICT);
        let (code, _) = call(&app, "POST", &format!("/v1/sessions/{id}/refine"), None).await;
        assert_eq!(code, StatusCode::CONFLICT);
        let (code, _) = call(&app, "POST", &format!("/v1/sessions/{id}/concretize"), Some(r#"{"nodes":[9]}"#.into())).await;
        assert_eq!(code, StatusCode::BAD_REQUEST);
        let (code, _) = call(&app, "DELETE", &format!("/v1/sessions/{id}"), None).await;
        assert_eq!(code, StatusCode::NO_CONTENT);
        let (code, _) = call(&app, "DELETE", &format!("/v1/sessions/{id}"), None).await;
        assert_eq!(code, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn export_import_and_schema() {
        let app = router(AppState::new(ServiceConfig::default()));
        let (_, body) = call(&app, "POST", "/v1/sessions", Some(d1_body(0.25))).await;
        let id = body["id"].as_str().unwrap().to_string();
        call(&app, "POST", &format!("/v1/sessions/{id}/search"), None).await;
        let (_, doc) = call(&app, "GET", &format!("/v1/sessions/{id}/export"), None).await;
        let (code, body) = call(&app, "POST", "/v1/sessions/import", Some(doc.to_string())).await;
        assert_eq!(code, StatusCode::CREATED);
        assert_eq!(body["status"], "critical");

        let (code, schema) = call(&app, "GET", "/v1/schema", None).await;
        assert_eq!(code, StatusCode::OK);
        assert!(schema["ViewDto"]["properties"]["gauge"].is_object());
    }

    #[tokio::test]
    async fn gc_evicts_only_idle() {
        let state = AppState::new(ServiceConfig::default());
        assert!(state.session_gc().is_empty());
        let s = RefinementSession::create(Arc::new(d1()), ReachabilityProperty::at_most(0.25, "goal"), SearchConfig::default()).unwrap();
        let id = state.insert(s);
        let later = Instant::now() + Duration::from_secs(10);
        assert!(state.session_gc_at(Instant::now(), Duration::from_secs(60)).is_empty());

        let held = state.get(&id).unwrap();
        let guard = held.session.lock().await;
        assert!(state.session_gc_at(later, Duration::from_secs(1)).is_empty());
        drop(guard);
        drop(held);
        assert_eq!(state.session_gc_at(later, Duration::from_secs(1)), vec![id]);
        assert!(state.is_empty());
    }

    #[test]
    fn local_origins() {
        for ok in ["http://localhost", "http://localhost:5173", "https://127.0.0.1:8080", "http://[::1]:3000"] {
            assert!(is_local_origin(ok.as_bytes()), "{ok}");
        }
        for bad in ["http://example.com", "http://localhost.evil.com", "null", "http://127.0.0.1:99999"] {
            assert!(!is_local_origin(bad.as_bytes()), "{bad}");
        }
    }

    #[test]
    fn model_names() {
        assert!(valid_model_name("d1"));
        assert!(!valid_model_name("../etc/passwd"));
        assert!(!valid_model_name(".hidden"));
    }
}
