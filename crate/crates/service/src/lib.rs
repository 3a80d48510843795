//! HTTP API over the analysis pipeline.
//!
//! A client uploads an image once and then sweeps parameters against it.
//! The TV flow of each patch is cached per session under its exact
//! parameters, so threshold and smoothing changes re-run only the cheap
//! detection stage. Reports are the same JSON the command-line tool writes.
//!
//! | route | |
//! |---|---|
//! | `POST /sessions` | multipart upload, field `image` |
//! | `GET, DELETE /sessions/{id}` | session metadata |
//! | `GET /sessions/{id}/image` | the upload as greyscale PNG |
//! | `POST /sessions/{id}/calibrate` | body: a calibration source |
//! | `POST /sessions/{id}/decompose` | band images and manifest |
//! | `POST /sessions/{id}/detect/chains` | chain-line report |
//! | `POST /sessions/{id}/detect/laids` | laid-line report |
//! | `GET, PATCH /sessions/{id}/reports/{rid}` | omissions, window anchor |
//! | `GET /sessions/{id}/artifacts/{path}` | PNG / PGM / JSON files |

pub mod config;
mod error;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mouldprint::detect::{
    chain_report_from_stack, laid_report_from_stack, laid_window_px, render_overlay, ChainLineReport, ChainParams,
    LaidLineReport, LaidParams, OverlayReport,
};
use mouldprint::imageio::{decode_gray, encode_png_gray, encode_png_rgb};
use mouldprint::spectral::decompose_stack;
use mouldprint::spectral::export::{render_decomposition, DecompositionManifest};
use mouldprint::{Calibration, CalibrationSource, Rect, RgbImage, TvFlowConfig, TvVariant};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

pub use config::ServiceConfig;
pub use error::ApiError;
use session::{Artifact, Session, StoredReport};

pub struct AppState {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    workers: Semaphore,
}

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            workers: Semaphore::new(config.workers),
            config,
            sessions: Mutex::default(),
        })
    }

    /// Drops sessions idle for at least the TTL; returns how many.
    pub fn expire_idle(&self) -> usize {
        let ttl = self.config.session_ttl;
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.idle_for() < ttl);
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.expire_idle();
        let s = self
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))?;
        s.touch();
        Ok(s)
    }
}

pub fn app(state: Arc<AppState>) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/image", get(get_image))
        .route("/sessions/{id}/calibrate", post(calibrate))
        .route("/sessions/{id}/decompose", post(decompose))
        .route("/sessions/{id}/detect/chains", post(detect_chains))
        .route("/sessions/{id}/detect/laids", post(detect_laids))
        .route("/sessions/{id}/reports/{rid}", get(get_report).patch(patch_report))
        .route("/sessions/{id}/artifacts/{*path}", get(get_artifact))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Binds the configured port and serves until the process ends.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port)).await?;
    let sweep = config.session_ttl.clamp(std::time::Duration::from_secs(1), std::time::Duration::from_secs(60));
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep);
        loop {
            tick.tick().await;
            sweeper.expire_idle();
        }
    });
    axum::serve(listener, app(state)).await
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    Ok(payload?.0)
}

fn artifact_url(session: &str, path: &str) -> String {
    format!("/sessions/{session}/artifacts/{path}")
}

#[derive(Serialize)]
struct SessionInfo {
    session_id: String,
    width: usize,
    height: usize,
    source: Option<String>,
    calibration: Option<Calibration>,
}

fn info(s: &Session) -> SessionInfo {
    SessionInfo {
        session_id: s.id.clone(),
        width: s.image.width(),
        height: s.image.height(),
        source: s.source.clone(),
        calibration: s.calibration(),
    }
}

async fn create_session(State(app): Shared, headers: HeaderMap, mut form: Multipart) -> ApiResult<Response> {
    let limit = app.config.max_upload_bytes;
    let declared = headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok());
    if declared.is_some_and(|n| n > limit as u64) {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("upload exceeds the {limit} byte limit"),
        ));
    }
    let mut upload = None;
    while let Some(field) = form.next_field().await? {
        if field.name() == Some("image") || (upload.is_none() && field.file_name().is_some()) {
            let name = field.file_name().map(str::to_owned);
            upload = Some((name, field.bytes().await?));
        }
    }
    let (source, bytes) = upload.ok_or_else(|| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", "multipart field `image` is missing")
    })?;
    let image = tokio::task::spawn_blocking(move || decode_gray(&bytes))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let id = format!("{:032x}", rand::random::<u128>());
    let session = Arc::new(Session::new(id.clone(), source, image));
    let payload = info(&session);
    app.expire_idle();
    app.sessions.lock().unwrap().insert(id, session);
    Ok((StatusCode::CREATED, Json(payload)).into_response())
}

async fn get_session(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let s = app.session(&id)?;
    Ok(Json(info(&s)))
}

async fn delete_session(State(app): Shared, Path(id): Path<String>) -> ApiResult<StatusCode> {
    app.session(&id)?;
    app.sessions.lock().unwrap().remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

async fn get_image(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let s = app.session(&id)?;
    let png = encode_png_gray(&s.image)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn calibrate(
    State(app): Shared,
    Path(id): Path<String>,
    payload: Result<Json<CalibrationSource>, JsonRejection>,
) -> ApiResult<Json<Calibration>> {
    let s = app.session(&id)?;
    let source = body(payload)?;
    let img = s.image.clone();
    let cal = tokio::task::spawn_blocking(move || source.calibrate(&img))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    s.set_calibration(cal.clone());
    Ok(Json(cal))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DecomposeRequest {
    patch: Option<Rect>,
    /// `[t_lo, t_hi]`: one band plus the fine part below and the residual
    /// above.
    band: Option<[f64; 2]>,
    /// Explicit ascending edges; overrides `band`.
    band_edges: Option<Vec<f64>>,
    variant: Option<TvVariant>,
    flow: TvFlowConfig,
}

fn band_edges(req: &DecomposeRequest) -> ApiResult<Vec<f64>> {
    let edges = match (&req.band_edges, req.band) {
        (Some(e), _) => e.clone(),
        (None, Some([lo, hi])) if !(lo < hi) => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_band",
                format!("band [{lo}, {hi}] needs t_lo < t_hi"),
            ))
        }
        (None, Some([lo, hi])) if lo <= 0.0 => vec![hi],
        (None, Some([lo, hi])) => vec![lo, hi],
        (None, None) => {
            let d = ChainParams::default();
            vec![d.t_lo, d.t_hi]
        }
    };
    let ascending = edges.windows(2).all(|p| p[0] < p[1]);
    if edges.is_empty() || !ascending || edges.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_band",
            format!("band edges {edges:?} must be positive and strictly ascending"),
        ));
    }
    Ok(edges)
}

#[derive(Serialize)]
struct DecomposeResponse {
    decomposition_id: String,
    cached: bool,
    manifest: DecompositionManifest,
    /// File name in the manifest to its URL.
    urls: BTreeMap<String, String>,
}

async fn decompose(
    State(app): Shared,
    Path(id): Path<String>,
    payload: Result<Json<DecomposeRequest>, JsonRejection>,
) -> ApiResult<Json<DecomposeResponse>> {
    let s = app.session(&id)?;
    let mut req = body(payload)?;
    if let Some(v) = req.variant {
        req.flow.variant = v;
    }
    let patch = s.patch(req.patch)?;
    let edges = band_edges(&req)?;
    let flow = req.flow;
    let (stack, cached) = s.stack(patch, flow, &app.workers).await?;

    let key = serde_json::to_string(&(patch, flow, &edges)).expect("plain data serialises");
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    let decomposition_id = format!("{:016x}", h.finish());
    let (manifest, artifacts) = tokio::task::spawn_blocking(move || {
        let d = decompose_stack(&stack, &edges)?;
        render_decomposition(&d, &flow, None)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;

    let mut urls = BTreeMap::new();
    for a in artifacts {
        let path = format!("decompositions/{decomposition_id}/{}", a.name);
        urls.insert(a.name.clone(), artifact_url(&s.id, &path));
        s.put_artifact(path, Artifact::for_name(&a.name, a.bytes));
    }
    let path = format!("decompositions/{decomposition_id}/manifest.json");
    urls.insert("manifest.json".into(), artifact_url(&s.id, &path));
    s.put_artifact(path, Artifact::for_name("manifest.json", serde_json::to_vec_pretty(&manifest).unwrap()));
    Ok(Json(DecomposeResponse {
        decomposition_id,
        cached,
        manifest,
        urls,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ChainRequest {
    patch: Option<Rect>,
    params: ChainParams,
    omit: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LaidRequest {
    patch: Option<Rect>,
    params: LaidParams,
}

/// Report payload plus transport fields.
#[derive(Serialize)]
struct ReportResponse {
    report_id: String,
    /// Whether the flow came from the session cache; absent on report
    /// reads and edits.
    #[serde(skip_serializing_if = "Option::is_none")]
    cached: Option<bool>,
    kind: &'static str,
    report: serde_json::Value,
    overlay_url: String,
}

fn render_report(s: &Session, rid: &str, stored: &StoredReport, cached: Option<bool>) -> ApiResult<ReportResponse> {
    let (kind, patch, overlay_for, report) = match stored {
        StoredReport::Chain(r) => ("chains", r.provenance.patch, OverlayReport::Chain(r), serde_json::to_value(r)),
        StoredReport::Laid(r) => ("laids", r.provenance.patch, OverlayReport::Laid(r), serde_json::to_value(r)),
    };
    let patch_img = s.crop(patch.unwrap_or_else(|| s.full_rect()))?;
    let overlay = render_overlay(&RgbImage::from_gray(&patch_img), overlay_for)?;
    let path = format!("reports/{rid}/overlay.png");
    s.put_artifact(path.clone(), Artifact::for_name(&path, encode_png_rgb(&overlay)?));
    let report = report.map_err(mouldprint::Error::from)?;
    s.put_artifact(
        format!("reports/{rid}/report.json"),
        Artifact::for_name("report.json", serde_json::to_vec_pretty(&report).unwrap()),
    );
    Ok(ReportResponse {
        report_id: rid.to_string(),
        cached,
        kind,
        report,
        overlay_url: artifact_url(&s.id, &path),
    })
}

async fn detect_chains(
    State(app): Shared,
    Path(id): Path<String>,
    payload: Result<Json<ChainRequest>, JsonRejection>,
) -> ApiResult<Json<ReportResponse>> {
    let s = app.session(&id)?;
    let req = body(payload)?;
    let patch = s.patch(req.patch)?;
    req.params.validate()?;
    let (stack, cached) = s.stack(patch, req.params.flow, &app.workers).await?;
    let cal = s.calibration();
    let params = req.params;
    let mut report: ChainLineReport =
        tokio::task::spawn_blocking(move || chain_report_from_stack(&stack, &params, cal.as_ref()))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    if let Some(omit) = &req.omit {
        report = report.with_omitted(omit)?;
    }
    report.provenance.source = s.source.clone();
    report.provenance.patch = Some(patch);
    let stored = StoredReport::Chain(report);
    let rid = s.add_report(stored.clone());
    Ok(Json(render_report(&s, &rid, &stored, Some(cached))?))
}

async fn detect_laids(
    State(app): Shared,
    Path(id): Path<String>,
    payload: Result<Json<LaidRequest>, JsonRejection>,
) -> ApiResult<Json<ReportResponse>> {
    let s = app.session(&id)?;
    let req = body(payload)?;
    let patch = s.patch(req.patch)?;
    req.params.validate()?;
    let cal = s.calibration().ok_or(mouldprint::Error::MissingCalibration)?;
    laid_window_px(patch.w, patch.h, &cal)?;
    let (stack, cached) = s.stack(patch, req.params.flow, &app.workers).await?;
    let params = req.params;
    let mut report: LaidLineReport = tokio::task::spawn_blocking(move || laid_report_from_stack(&stack, &params, &cal))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    report.provenance.source = s.source.clone();
    report.provenance.patch = Some(patch);
    let stored = StoredReport::Laid(report);
    let rid = s.add_report(stored.clone());
    Ok(Json(render_report(&s, &rid, &stored, Some(cached))?))
}

async fn get_report(State(app): Shared, Path((id, rid)): Path<(String, String)>) -> ApiResult<Json<ReportResponse>> {
    let s = app.session(&id)?;
    let stored = s.report(&rid).ok_or_else(|| ApiError::not_found(format!("no report `{rid}`")))?;
    Ok(Json(render_report(&s, &rid, &stored, None)?))
}

/// Edits to a stored report. `omit` replaces the omission set of a chain
/// report; `window_anchor_px` moves a laid report's window.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ReportEdit {
    omit: Option<Vec<usize>>,
    window_anchor_px: Option<f64>,
}

async fn patch_report(
    State(app): Shared,
    Path((id, rid)): Path<(String, String)>,
    payload: Result<Json<ReportEdit>, JsonRejection>,
) -> ApiResult<Json<ReportResponse>> {
    let s = app.session(&id)?;
    let edit = body(payload)?;
    let stored = s.report(&rid).ok_or_else(|| ApiError::not_found(format!("no report `{rid}`")))?;
    let updated = match (stored, edit) {
        (
            StoredReport::Chain(r),
            ReportEdit {
                omit: Some(omit),
                window_anchor_px: None,
            },
        ) => StoredReport::Chain(r.with_omitted(&omit)?),
        (
            StoredReport::Laid(r),
            ReportEdit {
                omit: None,
                window_anchor_px: Some(a),
            },
        ) => StoredReport::Laid(r.with_anchor(a)?),
        _ => {
            return Err(ApiError::invalid(
                "chain reports take `omit`, laid reports take `window_anchor_px`",
            ))
        }
    };
    s.replace_report(&rid, updated.clone());
    Ok(Json(render_report(&s, &rid, &updated, None)?))
}

async fn get_artifact(State(app): Shared, Path((id, path)): Path<(String, String)>) -> ApiResult<Response> {
    let s = app.session(&id)?;
    let a = s.artifact(&path).ok_or_else(|| ApiError::not_found(format!("no artifact `{path}`")))?;
    Ok(([(header::CONTENT_TYPE, a.content_type)], a.bytes.clone()).into_response())
}
