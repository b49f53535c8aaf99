//! HTTP API behind the operator console: scene tree, mapping authoring,
//! effect preview and live cluster control.

pub mod configurator;
pub mod control;

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;

use ivr_core::eventlog::event_to_json;
use ivr_core::mapping::{MappingError, Violation};

pub use configurator::{Configurator, PreviewRequest, PreviewStep, TreeNode};
pub use control::{feedback_json, Control};

/// Error body: `{code, message, violations?}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<Vec<Violation>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            violations: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn bad_request_code(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unprocessable", message)
    }

    pub fn cluster(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_GATEWAY, "cluster", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<MappingError> for ApiError {
    fn from(e: MappingError) -> Self {
        match e {
            MappingError::Violations(v) => Self {
                violations: Some(v),
                ..Self::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid_mapping",
                    "mapping does not fit the scene",
                )
            },
            other => Self::new(
                StatusCode::BAD_REQUEST,
                "malformed_mapping",
                other.to_string(),
            ),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
pub struct AppState {
    configurator: Arc<Mutex<Configurator>>,
    control: Arc<Mutex<Control>>,
    /// Kept here so streams can subscribe without waiting on a running command.
    feedback: broadcast::Sender<String>,
}

impl AppState {
    /// `storage` resolves scene, mapping and config paths; cluster logs go
    /// to `out_dir`.
    pub fn new(storage: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        let storage = storage.into();
        let control = Control::new(storage.clone(), out_dir);
        let feedback = control.sender();
        Self {
            configurator: Arc::new(Mutex::new(Configurator::new(storage))),
            control: Arc::new(Mutex::new(control)),
            feedback,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scene/tree", get(scene_tree))
        .route("/scene/load", post(scene_load))
        .route("/mapping", get(get_mapping).put(put_mapping))
        .route("/mapping/entries", post(add_entry))
        .route("/mapping/entries/{index}", delete(delete_entry))
        .route("/mapping/save", post(save_mapping))
        .route("/preview", post(preview))
        .route("/control/attach", post(attach))
        .route("/control/command", post(command))
        .route("/control/detach", post(detach))
        .route("/control/feedback", get(feedback))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// The mapping document exactly as the mapping file would hold it.
fn mapping_response(c: &Configurator) -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        c.mapping_text(),
    )
        .into_response()
}

async fn scene_tree(State(s): State<AppState>) -> ApiResult<Json<TreeNode>> {
    lock(&s.configurator).tree().map(Json)
}

#[derive(Deserialize)]
struct LoadRequest {
    scene_path: String,
    mapping_path: Option<String>,
}

async fn scene_load(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: LoadRequest = parse(&body)?;
    let mut c = lock(&s.configurator);
    let paths = c.load(&req.scene_path, req.mapping_path.as_deref())?;
    Ok(Json(
        json!({"scene": req.scene_path, "paths": paths, "entries": c.mapping().entries.len()}),
    ))
}

async fn get_mapping(State(s): State<AppState>) -> Response {
    mapping_response(&lock(&s.configurator))
}

async fn put_mapping(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let text =
        std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let mut c = lock(&s.configurator);
    c.replace_mapping(text)?;
    Ok(mapping_response(&c))
}

async fn add_entry(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let entry: Value = parse(&body)?;
    let mut c = lock(&s.configurator);
    c.add_entry(&entry)?;
    Ok((StatusCode::CREATED, mapping_response(&c)).into_response())
}

async fn delete_entry(State(s): State<AppState>, Path(index): Path<usize>) -> ApiResult<Response> {
    let mut c = lock(&s.configurator);
    c.delete_entry(index)?;
    Ok(mapping_response(&c))
}

#[derive(Deserialize)]
struct SaveRequest {
    mapping_path: String,
}

async fn save_mapping(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: SaveRequest = parse(&body)?;
    let bytes = lock(&s.configurator).save(&req.mapping_path)?;
    Ok(Json(json!({"path": req.mapping_path, "bytes": bytes})))
}

async fn preview(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: PreviewRequest = parse(&body)?;
    let events = lock(&s.configurator).preview(&req)?;
    // Events use the log's own line format, joined into one array.
    let body = format!(
        "[{}]",
        events
            .iter()
            .map(event_to_json)
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

/// Runs a blocking cluster operation off the async workers.
async fn with_control<T: Send + 'static>(
    s: &AppState,
    f: impl FnOnce(&mut Control) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let control = s.control.clone();
    tokio::task::spawn_blocking(move || f(&mut lock(&control)))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Deserialize)]
struct AttachRequest {
    config_path: String,
}

async fn attach(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: AttachRequest = parse(&body)?;
    let consumers = with_control(&s, move |c| c.attach(&req.config_path)).await?;
    Ok(Json(json!({"consumers": consumers})))
}

#[derive(Deserialize)]
struct CommandRequest {
    line: String,
}

async fn command(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: CommandRequest = parse(&body)?;
    let sent = with_control(&s, move |c| c.command(&req.line)).await?;
    Ok(Json(json!({"accepted": true, "broadcast": sent})))
}

async fn detach(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    let report = with_control(&s, Control::detach).await?;
    let logs: Vec<Value> = report
        .logs
        .iter()
        .map(|(id, path)| json!({"consumer": id, "path": path.display().to_string()}))
        .collect();
    Ok(Json(
        json!({"ticks": report.ticks, "commands": report.commands, "logs": logs}),
    ))
}

/// Server-sent events, one JSON body per feedback message. Observers that
/// fall behind skip ahead and are told how much they missed.
async fn feedback(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = s.feedback.subscribe();
    let events = stream::unfold(rx, |mut rx| async move {
        let event = match rx.recv().await {
            Ok(body) => Event::default().event("feedback").data(body),
            Err(broadcast::error::RecvError::Lagged(n)) => {
                Event::default().event("lagged").data(n.to_string())
            }
            Err(broadcast::error::RecvError::Closed) => return None,
        };
        Some((Ok(event), rx))
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}
