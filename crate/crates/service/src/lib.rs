//! Local HTTP preview service for interactive material editing.
//!
//! ```text
//! GET  /api/segments            segment list (409 without a session)
//! PUT  /api/segments/{id}       {"roughness": r, "metalness": m} -> {"revision": n}
//! GET  /api/render              PNG; query azimuth, elevation, mode, rig
//! POST /api/export              writes a glTF bundle, returns its paths
//! GET  /                        static UI bundle
//! ```
//!
//! Responses that depend on the material table carry an `X-Revision` header.

mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use pbrboost_core::pipeline::RenderMode;
use pbrboost_core::shading::LightRig;
use pbrboost_core::Error;

pub use session::{SegmentInfo, Session, SessionInputs, Snapshot};

pub const DEFAULT_PORT: u16 = 8745;
pub const REVISION_HEADER: &str = "x-revision";

#[derive(Default)]
pub struct AppState {
    pub session: Option<Arc<Session>>,
    /// Directory holding the editor bundle. A placeholder page is served at
    /// `/` when absent.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownSegment(_) => StatusCode::NOT_FOUND,
            Error::Range { .. } | Error::Invalid(_) | Error::Schema { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn session(state: &AppState) -> ApiResult<Arc<Session>> {
    state
        .session
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no session loaded"))
}

fn with_revision(mut resp: Response, revision: u64) -> Response {
    resp.headers_mut().insert(REVISION_HEADER, HeaderValue::from(revision));
    resp
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn list_segments(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let s = session(&state)?;
    let snap = s.snapshot();
    let list: Vec<_> = s
        .segments(&snap)
        .into_iter()
        .map(|i| {
            json!({
                "id": i.id,
                "name": i.name,
                "roughness": i.roughness,
                "metalness": i.metalness,
                "face_count": i.face_count,
            })
        })
        .collect();
    Ok(with_revision(Json(list).into_response(), snap.revision))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentUpdate {
    roughness: f64,
    metalness: f64,
}

async fn update_segment(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let s = session(&state)?;
    let id: u32 = id
        .parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("unknown segment {id}")))?;
    let update: SegmentUpdate = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))?;
    let revision = blocking(move || Ok(s.update_segment(id, update.roughness, update.metalness)?)).await?;
    Ok(with_revision(Json(json!({ "revision": revision })).into_response(), revision))
}

fn angle(params: &HashMap<String, String>, key: &str, limit: f64) -> ApiResult<f64> {
    let Some(raw) = params.get(key) else { return Ok(0.0) };
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() && v.abs() <= limit => Ok(v),
        _ => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid {key} {raw:?}"))),
    }
}

async fn render(State(state): State<Arc<AppState>>, Query(params): Query<HashMap<String, String>>) -> ApiResult<Response> {
    let s = session(&state)?;
    let azimuth = angle(&params, "azimuth", 1e6)?;
    let elevation = angle(&params, "elevation", 90.0)?;
    let mode: RenderMode = params
        .get("mode")
        .map_or(Ok(RenderMode::Relight), |m| m.parse())
        .map_err(|e: Error| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let rig_name = params.get("rig").map_or("studio", String::as_str);
    let rig = LightRig::preset(rig_name).ok_or_else(|| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("unknown rig {rig_name:?} (expected one of {})", LightRig::PRESETS.join(", ")),
        )
    })?;
    let snap = s.snapshot();
    let revision = snap.revision;
    let png = blocking(move || {
        let cam = s.camera(azimuth, elevation);
        Ok(s.render(&snap, mode, &cam, &rig)?)
    })
    .await?;
    let resp = ([(header::CONTENT_TYPE, "image/png")], png).into_response();
    Ok(with_revision(resp, revision))
}

async fn export(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let s = session(&state)?;
    let snap = s.snapshot();
    let revision = snap.revision;
    let paths = blocking(move || {
        s.export(&snap)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
    })
    .await?;
    let show = |p: &std::path::Path| p.display().to_string();
    let body = json!({
        "revision": revision,
        "paths": {
            "gltf": show(&paths.gltf),
            "buffer": show(&paths.buffer),
            "albedo": show(&paths.albedo),
            "metallic_roughness": show(&paths.metallic_roughness),
            "normal": paths.normal.as_deref().map(show),
            "materials": show(&paths.materials),
        }
    });
    Ok(with_revision(Json(body).into_response(), revision))
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>pbrboost</title></head>\n\
<body><h1>pbrboost preview service</h1>\n<p>No editor bundle configured. The API is available under <code>/api</code>.</p>\n\
<p><img src=\"/api/render?mode=relight\" alt=\"preview\"></p></body></html>\n";

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.static_dir.clone();
    let api = Router::new()
        .route("/api/segments", get(list_segments))
        .route("/api/segments/{id}", put(update_segment))
        .route("/api/render", get(render))
        .route("/api/export", post(export))
        .with_state(Arc::new(state));
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
