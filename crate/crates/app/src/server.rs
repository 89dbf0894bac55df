//! HTTP API over the survey engine.
//!
//! Every accepted mutation is appended (and synced) to the data directory
//! before the session advances and before the response goes out, so a
//! restart replays to exactly the state clients have seen.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{ConnectInfo, FromRequest, FromRequestParts, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chrono::Utc;
use coselect_core::pipeline::analyze_events;
use coselect_core::survey::{
    read_log, Catalog, DesignId, LogRecord, Occupation, QuestionnaireResponse, SelectionEvent,
    SessionConfig, SessionId, SessionRecord, SessionState, SurveyEngine, SurveyError,
};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::analysis::{write_files, AnalysisRequest};
use crate::store::{Store, StoreError};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    /// Defaults for new sessions. `rng_seed` here is the service seed.
    pub session_defaults: SessionConfig,
    pub admin_token: Option<String>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct AppState {
    engine: SurveyEngine,
    store: Mutex<Store>,
    catalog: Catalog,
    defaults: SessionConfig,
    admin_token: Option<String>,
}

impl AppState {
    /// Opens the data directory and replays it.
    pub fn open(config: &ServerConfig) -> Result<Arc<Self>, StoreError> {
        let engine = SurveyEngine::new();
        let (store, catalog) =
            Store::open(&config.data_dir, &engine, config.session_defaults.pool_size)?;
        Ok(Arc::new(Self {
            engine,
            store: Mutex::new(store),
            catalog,
            defaults: config.session_defaults,
            admin_token: config.admin_token.clone(),
        }))
    }

    pub fn engine(&self) -> &SurveyEngine {
        &self.engine
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/panel", get(get_panel))
        .route(
            "/api/sessions/{id}/iterations/{n}/selection",
            post(post_selection),
        )
        .route("/api/sessions/{id}/questionnaire", post(post_questionnaire))
        .route("/api/sessions/{id}/review", get(get_review))
        .route("/api/catalog", get(get_catalog))
        .route("/api/admin/analysis", post(post_analysis))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Unauthorized,
    Forbidden,
    NotFound(String),
    Conflict(String),
    Internal(String),
}

impl From<SurveyError> for ApiError {
    fn from(e: SurveyError) -> Self {
        match e {
            SurveyError::NotFound(_) => ApiError::NotFound(e.to_string()),
            SurveyError::InvalidConfig(_) | SurveyError::InvalidCatalog(_) => {
                ApiError::BadRequest(e.to_string())
            }
            SurveyError::WrongState(_)
            | SurveyError::InvalidSelection(_)
            | SurveyError::DuplicateSession(_)
            | SurveyError::ReplayMismatch(_) => ApiError::Conflict(e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m),
            ApiError::Unauthorized => (
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "admin token required".into(),
            ),
            ApiError::Forbidden => (
                StatusCode::FORBIDDEN,
                "forbidden",
                "admin endpoints are loopback-only unless an admin token is configured".into(),
            ),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, "conflict", m),
            ApiError::Internal(m) => {
                tracing::error!(%m, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal", m)
            }
        };
        (
            status,
            axum::Json(json!({ "error": kind, "message": message })),
        )
            .into_response()
    }
}

/// JSON body whose rejections become 400s.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Json<T>(T);

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct Path<T>(T);

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigOverrides {
    pool_size: Option<usize>,
    panel_size: Option<usize>,
    iterations: Option<u32>,
    rng_seed: Option<u64>,
    exposure_balanced: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    config: Option<ConfigOverrides>,
}

#[derive(Debug, Serialize)]
struct PanelView {
    session_id: SessionId,
    iteration: u32,
    panel: Vec<DesignId>,
    image_uris: Vec<String>,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<PanelView>)> {
    let request: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?
    };
    let o = request.config.unwrap_or_default();
    let d = app.defaults;
    let config = SessionConfig {
        pool_size: o.pool_size.unwrap_or(d.pool_size),
        panel_size: o.panel_size.unwrap_or(d.panel_size),
        iterations: o.iterations.unwrap_or(d.iterations),
        rng_seed: o.rng_seed.unwrap_or(d.rng_seed),
        exposure_balanced: o.exposure_balanced.unwrap_or(d.exposure_balanced),
    };
    config.validate()?;
    if config.pool_size > app.catalog.len() {
        return Err(ApiError::BadRequest(format!(
            "pool_size {} exceeds catalog size {}",
            config.pool_size,
            app.catalog.len()
        )));
    }

    let id = app.engine.allocate_id();
    let record = SessionRecord {
        session_id: id.clone(),
        catalog_version: app.catalog.version().to_string(),
        config,
        created_at: Utc::now(),
    };
    app.store.lock().append_session(&record)?;
    let handle = app
        .engine
        .create_session_with_id(id.clone(), config, app.catalog.version())?;
    let mut session = handle.lock();
    let panel = session.next_panel()?.to_vec();
    Ok((
        StatusCode::CREATED,
        Json(PanelView {
            session_id: id,
            iteration: 1,
            image_uris: app.catalog.image_uris(&panel),
            panel,
        }),
    ))
}

async fn get_panel(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<PanelView>> {
    let id = SessionId::new(id);
    let handle = app.engine.session(&id)?;
    let mut session = handle.lock();
    let SessionState::InProgress { next_iteration } = session.state() else {
        return Err(ApiError::Conflict(format!(
            "session {id} has no pending panel"
        )));
    };
    let panel = session.next_panel()?.to_vec();
    Ok(Json(PanelView {
        session_id: id,
        iteration: next_iteration,
        image_uris: app.catalog.image_uris(&panel),
        panel,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionBody {
    selected: Vec<DesignId>,
}

async fn post_selection(
    State(app): State<Arc<AppState>>,
    Path((id, n)): Path<(String, u32)>,
    Json(body): Json<SelectionBody>,
) -> ApiResult<Json<Value>> {
    let id = SessionId::new(id);
    let handle = app.engine.session(&id)?;
    let mut session = handle.lock();
    let event = session.prepare_selection(n, &body.selected, Utc::now())?;
    app.store.lock().append_event(&event)?;
    session.apply_selection(event)?;
    Ok(Json(match session.state() {
        SessionState::InProgress { next_iteration } => {
            json!({ "next": "iteration", "iteration": next_iteration })
        }
        _ => json!({ "next": "questionnaire" }),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionnaireBody {
    criteria_text: String,
    #[serde(default)]
    age: Option<u32>,
    #[serde(default)]
    occupation: Option<Occupation>,
}

async fn post_questionnaire(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<QuestionnaireBody>,
) -> ApiResult<Json<Value>> {
    if body.criteria_text.trim().is_empty() {
        return Err(ApiError::BadRequest(
            "criteria_text must not be empty".into(),
        ));
    }
    let id = SessionId::new(id);
    let handle = app.engine.session(&id)?;
    let mut session = handle.lock();
    let response = QuestionnaireResponse {
        session_id: id,
        criteria_text: body.criteria_text,
        age: body.age,
        occupation: body.occupation,
    };
    session.check_questionnaire(&response)?;
    app.store.lock().append_event(&response)?;
    session.record_questionnaire(response)?;
    Ok(Json(json!({ "status": "completed" })))
}

#[derive(Debug, Serialize)]
struct ReviewIteration<'a> {
    iteration_index: u32,
    shown: &'a [DesignId],
    selected: &'a [DesignId],
    image_uris: Vec<String>,
}

async fn get_review(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let id = SessionId::new(id);
    let handle = app.engine.session(&id)?;
    let session = handle.lock();
    let iterations: Vec<_> = session
        .events()
        .iter()
        .map(|e| ReviewIteration {
            iteration_index: e.iteration_index,
            shown: &e.shown,
            selected: &e.selected,
            image_uris: app.catalog.image_uris(&e.shown),
        })
        .collect();
    Ok(Json(json!({
        "session_id": id,
        "state": session.state(),
        "iterations": iterations,
        "questionnaire": session.questionnaire(),
    })))
}

async fn get_catalog(State(app): State<Arc<AppState>>) -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "application/json")],
        app.catalog.to_json(),
    )
}

fn authorize(app: &AppState, peer: SocketAddr, headers: &HeaderMap) -> ApiResult<()> {
    match &app.admin_token {
        Some(token) => {
            let given = headers
                .get(header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.strip_prefix("Bearer "));
            if given == Some(token.as_str()) {
                Ok(())
            } else {
                Err(ApiError::Unauthorized)
            }
        }
        None if peer.ip().is_loopback() => Ok(()),
        None => Err(ApiError::Forbidden),
    }
}

/// Events of the stored sessions (all, or the listed ones), in session id
/// then iteration order.
fn snapshot(app: &AppState, filter: Option<&[SessionId]>) -> ApiResult<Vec<SelectionEvent>> {
    let ids = match filter {
        Some(ids) => ids.to_vec(),
        None => app.engine.session_ids(),
    };
    let mut events = Vec::new();
    for id in &ids {
        events.extend_from_slice(app.engine.session(id)?.lock().events());
    }
    Ok(events)
}

async fn post_analysis(
    State(app): State<Arc<AppState>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    Json(request): Json<AnalysisRequest>,
) -> ApiResult<Json<Value>> {
    authorize(&app, peer, &headers)?;
    let pool_size = app.catalog.len();
    let options = request.options(pool_size).map_err(ApiError::BadRequest)?;
    let events = match &request.log {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| ApiError::BadRequest(format!("{}: {e}", path.display())))?;
            read_log(std::io::BufReader::new(file), Some(pool_size))
                .map_err(|e| ApiError::BadRequest(format!("{}: {e}", path.display())))?
                .iter()
                .filter_map(LogRecord::as_selection)
                .cloned()
                .collect()
        }
        None => snapshot(&app, request.sessions.as_deref())?,
    };
    let output_dir = request.output_dir.clone();
    tokio::task::spawn_blocking(move || {
        let analysis =
            analyze_events(&events, &options).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let written = match &output_dir {
            Some(dir) => write_files(dir, &analysis.files())
                .map_err(|e| ApiError::BadRequest(format!("{}: {e}", dir.display())))?,
            None => Vec::new(),
        };
        Ok(Json(json!({
            "events": analysis.events,
            "report": analysis.summary_json(),
            "written": written,
        })))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}
