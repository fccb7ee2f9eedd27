//! Read-only HTTP API over a directory of CSV datasets.
//!
//! - `GET /api/health`
//! - `GET /api/datasets`: CSV files in the data directory and the built-in
//!   shapes, each with its variables
//! - `POST /api/matrix`: body is a matrix spec, response the matrix JSON,
//!   byte-identical to what `mapper-stitch matrix` writes
//!
//! Errors are JSON objects `{ "error", "reason" }` where `reason` is a
//! stable machine-readable string.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::Context;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mapper_stitch::interface::{list_datasets, load_dataset, DatasetRef, InterfaceError, SCHEMA_VERSION};
use mapper_stitch::{compute_matrix, MatrixSpec};
use serde_json::json;

/// Largest synthetic sample a request may ask for.
pub const MAX_SHAPE_POINTS: usize = 20_000;
const CACHE_CAPACITY: usize = 64;

struct AppState {
    data_dir: PathBuf,
    /// Rendered responses keyed by canonical spec JSON and dataset bytes.
    cache: Mutex<HashMap<String, Arc<String>>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    reason: &'static str,
    message: String,
    detail: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, reason: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            reason,
            message: message.into(),
            detail: None,
        }
    }
}

impl From<InterfaceError> for ApiError {
    fn from(err: InterfaceError) -> Self {
        let message = err.to_string();
        match err {
            InterfaceError::Spec(e) => ApiError::new(StatusCode::BAD_REQUEST, e.reason(), message),
            InterfaceError::UnknownDataset(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown dataset", message),
            InterfaceError::UnknownVariable(_) => ApiError::new(StatusCode::BAD_REQUEST, "unknown variable", message),
            InterfaceError::Verification { report, .. } => ApiError {
                detail: serde_json::to_value(&report).ok(),
                ..ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "verification failed", message)
            },
            InterfaceError::Io { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error", message),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "data error", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message, "reason": self.reason });
        if let Some(detail) = self.detail {
            body["detail"] = detail;
        }
        (self.status, Json(body)).into_response()
    }
}

pub fn router(data_dir: PathBuf) -> Router {
    let state = Arc::new(AppState {
        data_dir,
        cache: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/api/health", get(health))
        .route("/api/datasets", get(datasets))
        .route("/api/matrix", post(matrix))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, data_dir: PathBuf) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot bind {addr}"))?;
    tracing::info!(%addr, data = %data_dir.display(), "serving");
    axum::serve(listener, router(data_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server stopped")
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": SCHEMA_VERSION }))
}

async fn datasets(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let dir = state.data_dir.clone();
    let list = tokio::task::spawn_blocking(move || list_datasets(&dir))
        .await
        .unwrap_or_default();
    Json(json!({ "datasets": list }))
}

async fn matrix(State(state): State<Arc<AppState>>, body: String) -> Result<Response, ApiError> {
    let spec: MatrixSpec = serde_json::from_str(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed spec", e.to_string()))?;
    spec.validate().map_err(InterfaceError::from)?;
    if let DatasetRef::Shape { n_points, .. } = spec.dataset {
        if n_points > MAX_SHAPE_POINTS {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "dataset too large",
                format!("shapes are limited to {MAX_SHAPE_POINTS} points"),
            ));
        }
    }
    let body = tokio::task::spawn_blocking(move || render(&state, &spec))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error", e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "application/json")], body.as_ref().clone()).into_response())
}

fn render(state: &AppState, spec: &MatrixSpec) -> Result<Arc<String>, ApiError> {
    let mut hasher = DefaultHasher::new();
    if let DatasetRef::Csv { name, .. } = &spec.dataset {
        let bytes =
            std::fs::read(state.data_dir.join(name)).map_err(|_| InterfaceError::UnknownDataset(name.clone()))?;
        bytes.hash(&mut hasher);
    }
    let key = format!(
        "{}#{:016x}",
        serde_json::to_string(spec).expect("specs serialize"),
        hasher.finish()
    );
    if let Some(hit) = state.cache.lock().expect("cache lock").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let cloud = load_dataset(&spec.dataset, spec.seed, &state.data_dir)?;
    let rendered = Arc::new(compute_matrix(spec, &cloud)?.to_json_string());
    let mut cache = state.cache.lock().expect("cache lock");
    if cache.len() >= CACHE_CAPACITY {
        cache.clear();
    }
    cache.insert(key, Arc::clone(&rendered));
    Ok(rendered)
}
