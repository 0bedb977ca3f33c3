//! JSON-over-HTTP facade under `/v1`.
//!
//! | method | path                          | success                          |
//! |--------|-------------------------------|----------------------------------|
//! | POST   | `/v1/sessions`                | 201 session handle               |
//! | POST   | `/v1/sessions/{id}/messages`  | 200 reply, phase, question       |
//! | GET    | `/v1/sessions/{id}`           | 200 handle plus transcript       |
//! | GET    | `/v1/sessions/{id}/record`    | 200 canonical medical record     |
//! | GET    | `/v1/images/{ref}`            | 200 bytes or 302 redirect        |
//! | GET    | `/v1/health`                  | 200 status and locale            |
//!
//! Errors are `{"code": ..., "message": ...}` with the codes of [`ApiError`].
//! Session documents live in a [`SnapshotStore`] and are re-read on every
//! request, so a restarted server continues exactly where the old one
//! stopped. Requests to the same session are serialized.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use medconsult_core::crm::{ConsultationPhase, CrmError};
use medconsult_core::dialogue::{DialogueError, Engine, Generator};
use medconsult_core::kg::{EntityId, KnowledgeGraph};
use medconsult_core::nlu::NluError;
use medconsult_core::record::RecordError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::generator::HttpGenerator;
use crate::session::{
    transcript_view, utterance_view, SessionDocument, SessionIdGenerator, SnapshotStore, StoreError, UtteranceView,
};

/// Closed set of error codes returned by the API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    UnknownSession,
    SessionClosed,
    SessionNotClosed,
    UnknownImage,
    StoreUnavailable,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::UnknownSession | ErrorCode::UnknownImage => StatusCode::NOT_FOUND,
            ErrorCode::SessionClosed | ErrorCode::SessionNotClosed => StatusCode::CONFLICT,
            ErrorCode::StoreUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::UnknownSession(_) => ErrorCode::UnknownSession,
            StoreError::Unavailable { .. } => ErrorCode::StoreUnavailable,
            StoreError::Corrupt { .. } => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<DialogueError> for ApiError {
    fn from(e: DialogueError) -> Self {
        let code = match e {
            DialogueError::Crm(CrmError::SessionClosed) => ErrorCode::SessionClosed,
            DialogueError::Nlu(NluError::EmptyUtterance) => ErrorCode::BadRequest,
            _ => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<RecordError> for ApiError {
    fn from(e: RecordError) -> Self {
        let code = match e {
            RecordError::SessionNotClosed(_) | RecordError::NoDiagnosis => ErrorCode::SessionNotClosed,
            RecordError::Template(_) => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

/// Everything the handlers share. The graph and engine are read-only.
pub struct AppState {
    pub kg: Arc<KnowledgeGraph>,
    pub engine: Arc<Engine>,
    pub store: SnapshotStore,
    pub asset_root: Option<PathBuf>,
    pub generator: Option<Arc<HttpGenerator>>,
    ids: Mutex<SessionIdGenerator>,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(
        kg: Arc<KnowledgeGraph>,
        engine: Arc<Engine>,
        store: SnapshotStore,
        asset_root: Option<PathBuf>,
        seed: Option<u64>,
    ) -> Self {
        Self {
            kg,
            engine,
            store,
            asset_root,
            generator: None,
            ids: Mutex::new(SessionIdGenerator::new(seed)),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_generator(mut self, generator: HttpGenerator) -> Self {
        self.generator = Some(Arc::new(generator));
        self
    }

    fn session_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/record", get(get_record))
        .route("/v1/images/{image}", get(get_image))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

async fn health(State(state): State<SharedState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "locale": state.engine.templates.locale(),
        "diseases": state.kg.disease_count(),
        "version": env!("CARGO_PKG_VERSION"),
    }))
}

async fn create_session(State(state): State<SharedState>) -> Result<Response, ApiError> {
    let doc = {
        let mut ids = state.ids.lock().expect("id generator poisoned");
        let mut id = ids.next_id();
        while state.store.exists(id.as_str()) {
            id = ids.next_id();
        }
        SessionDocument::new(&state.kg, id)
    };
    let store = state.store.clone();
    let handle = doc.handle();
    tokio::task::spawn_blocking(move || store.save(&doc))
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

#[derive(Debug, Serialize)]
struct SessionView {
    session_id: String,
    created_at: u64,
    phase: ConsultationPhase,
    turn: u32,
    candidates_count: usize,
    transcript: Vec<UtteranceView>,
}

async fn get_session(State(state): State<SharedState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let doc = state.store.load(&id)?;
    let c = &doc.consultation;
    Ok(Json(SessionView {
        session_id: id,
        created_at: doc.created_at,
        phase: c.state.phase,
        turn: c.state.turn,
        candidates_count: c.state.candidate_diseases.len(),
        transcript: transcript_view(&state.kg, c),
    })
    .into_response())
}

#[derive(Debug, Deserialize)]
struct MessageBody {
    text: String,
}

#[derive(Debug, Serialize)]
struct TriageView {
    department: String,
    department_name: String,
    confidence: f64,
}

#[derive(Debug, Serialize)]
struct MessageReply {
    reply: UtteranceView,
    phase: ConsultationPhase,
    asked_symptom: Option<String>,
    asked_symptom_id: Option<String>,
    candidates_count: usize,
    fallback: bool,
    triage: Option<TriageView>,
}

async fn post_message(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<MessageBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::new(ErrorCode::BadRequest, e.body_text()))?;
    if body.text.trim().is_empty() {
        return Err(ApiError::new(ErrorCode::BadRequest, "text must not be empty"));
    }
    let lock = state.session_lock(&id);
    let _guard = lock.lock().await;
    let worker = state.clone();
    tokio::task::spawn_blocking(move || -> Result<MessageReply, ApiError> {
        let state = worker;
        let mut doc = state.store.load(&id)?;
        let generator = state.generator.as_deref().map(|g| g as &dyn Generator);
        let outcome = state.engine.step(&state.kg, &mut doc.consultation, &body.text, generator)?;
        state.store.save(&doc)?;
        let name = |e: &EntityId| state.kg.name_of(e).to_string();
        Ok(MessageReply {
            reply: utterance_view(&state.kg, &outcome.reply),
            phase: outcome.phase,
            asked_symptom: outcome.asked_symptom.as_ref().map(name),
            asked_symptom_id: outcome.asked_symptom.as_ref().map(|e| e.as_str().to_string()),
            candidates_count: outcome.candidates_count,
            fallback: outcome.fallback,
            triage: outcome.triage.map(|t| TriageView {
                department_name: name(&t.department),
                department: t.department.as_str().to_string(),
                confidence: t.confidence,
            }),
        })
    })
    .await
    .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?
    .map(|reply| Json(reply).into_response())
}

async fn get_record(State(state): State<SharedState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let doc = state.store.load(&id)?;
    let record = state.engine.record(&state.kg, &doc.consultation)?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], record.to_json()).into_response())
}

pub fn content_type_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

/// Resolves a relative locator under `root`, refusing anything that could
/// leave it.
pub fn resolve_asset(root: &Path, locator: &str) -> Option<PathBuf> {
    let relative = Path::new(locator);
    if relative.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let root = root.canonicalize().ok()?;
    let path = root.join(relative).canonicalize().ok()?;
    (path.starts_with(&root) && path.is_file()).then_some(path)
}

async fn get_image(State(state): State<SharedState>, UrlPath(image): UrlPath<String>) -> Result<Response, ApiError> {
    let unknown = || ApiError::new(ErrorCode::UnknownImage, format!("unknown image `{image}`"));
    let id = EntityId::try_new(image.clone()).ok_or_else(unknown)?;
    let found = state.kg.image(&id).ok_or_else(unknown)?;
    let locator = found.image_uri.clone();
    if locator.starts_with("http://") || locator.starts_with("https://") {
        let location = HeaderValue::from_str(&locator).map_err(|_| unknown())?;
        return Ok((StatusCode::FOUND, [(header::LOCATION, location)]).into_response());
    }
    let root = state.asset_root.as_deref().ok_or_else(unknown)?;
    let path = resolve_asset(root, &locator).ok_or_else(unknown)?;
    let bytes = tokio::fs::read(&path).await.map_err(|_| unknown())?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static(content_type_for(&path)))], bytes).into_response())
}

/// Binds `listen` and serves until Ctrl-C. Prints the bound address on
/// stdout as `listening on <addr>` so callers can use port 0.
pub async fn serve(state: SharedState, listen: &str, static_dir: Option<&Path>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    println!("listening on {addr}");
    tracing::info!(%addr, "service started");
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asset_resolution_stays_under_root() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("images")).unwrap();
        std::fs::write(dir.path().join("images/a.png"), b"x").unwrap();
        assert!(resolve_asset(dir.path(), "images/a.png").is_some());
        assert!(resolve_asset(dir.path(), "../a.png").is_none());
        assert!(resolve_asset(dir.path(), "/etc/passwd").is_none());
        assert!(resolve_asset(dir.path(), "images/missing.png").is_none());
    }

    #[test]
    fn error_codes_map_to_statuses() {
        assert_eq!(ErrorCode::SessionClosed.status(), StatusCode::CONFLICT);
        assert_eq!(ErrorCode::UnknownImage.status(), StatusCode::NOT_FOUND);
        assert_eq!(serde_json::to_string(&ErrorCode::SessionNotClosed).unwrap(), "\"session_not_closed\"");
    }
}
