use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use mouldprint::detect::{ChainLineReport, LaidLineReport};
use mouldprint::image::crop_patch;
use mouldprint::spectral::{tv_flow, ScaleSpaceStack};
use mouldprint::{Calibration, GrayImage, Rect, TvFlowConfig};
use tokio::sync::{OnceCell, Semaphore};

use crate::error::ApiError;

pub struct Artifact {
    pub content_type: &'static str,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn for_name(name: &str, bytes: Vec<u8>) -> Self {
        let content_type = match name.rsplit('.').next() {
            Some("png") => "image/png",
            Some("pgm") => "image/x-portable-graymap",
            Some("json") => "application/json",
            _ => "application/octet-stream",
        };
        Self { content_type, bytes }
    }
}

#[derive(Clone)]
pub enum StoredReport {
    Chain(ChainLineReport),
    Laid(LaidLineReport),
}

#[derive(Default)]
struct Mutable {
    calibration: Option<Calibration>,
    artifacts: HashMap<String, Arc<Artifact>>,
    reports: HashMap<String, StoredReport>,
    next_report: u64,
}

type StackCell = Arc<OnceCell<Arc<ScaleSpaceStack>>>;

pub struct Session {
    pub id: String,
    pub source: Option<String>,
    pub image: Arc<GrayImage>,
    state: Mutex<Mutable>,
    /// One cell per exact (patch, flow) key; concurrent requests for the
    /// same key wait on the first solve instead of repeating it.
    stacks: Mutex<HashMap<String, StackCell>>,
    last_used: Mutex<Instant>,
}

impl Session {
    pub fn new(id: String, source: Option<String>, image: GrayImage) -> Self {
        Self {
            id,
            source,
            image: Arc::new(image),
            state: Mutex::default(),
            stacks: Mutex::default(),
            last_used: Mutex::new(Instant::now()),
        }
    }

    pub fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    pub fn idle_for(&self) -> Duration {
        self.last_used.lock().unwrap().elapsed()
    }

    pub fn calibration(&self) -> Option<Calibration> {
        self.state.lock().unwrap().calibration.clone()
    }

    pub fn set_calibration(&self, cal: Calibration) {
        self.state.lock().unwrap().calibration = Some(cal);
    }

    pub fn full_rect(&self) -> Rect {
        Rect::full(self.image.width(), self.image.height())
    }

    /// The requested patch, or the whole image; rejects rectangles that are
    /// empty or leave the image.
    pub fn patch(&self, requested: Option<Rect>) -> Result<Rect, ApiError> {
        let r = requested.unwrap_or_else(|| self.full_rect());
        if r.w == 0 || r.h == 0 || r.x0 + r.w > self.image.width() || r.y0 + r.h > self.image.height() {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "out_of_bounds",
                format!(
                    "patch {},{} {}x{} is empty or exceeds the image {}x{}",
                    r.x0,
                    r.y0,
                    r.w,
                    r.h,
                    self.image.width(),
                    self.image.height()
                ),
            ));
        }
        Ok(r)
    }

    pub fn crop(&self, r: Rect) -> Result<GrayImage, ApiError> {
        Ok(crop_patch(&self.image, r.x0, r.y0, r.w, r.h)?)
    }

    /// Flow of a patch, computed once per exact key. Returns the stack and
    /// whether it came from the cache.
    pub async fn stack(
        &self,
        patch: Rect,
        flow: TvFlowConfig,
        workers: &Semaphore,
    ) -> Result<(Arc<ScaleSpaceStack>, bool), ApiError> {
        flow.validate()?;
        let key = serde_json::to_string(&(patch, flow)).expect("plain data serialises");
        let cell = self.stacks.lock().unwrap().entry(key).or_default().clone();
        let fresh = AtomicBool::new(false);
        let stack = cell
            .get_or_try_init(|| async {
                fresh.store(true, Ordering::Relaxed);
                let _permit = workers.acquire().await.expect("semaphore never closes");
                let img = self.crop(patch)?;
                tokio::task::spawn_blocking(move || tv_flow(&img, &flow))
                    .await
                    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
                    .map(Arc::new)
                    .map_err(ApiError::from)
            })
            .await?;
        Ok((stack.clone(), !fresh.load(Ordering::Relaxed)))
    }

    pub fn put_artifact(&self, path: String, artifact: Artifact) {
        self.state.lock().unwrap().artifacts.insert(path, Arc::new(artifact));
    }

    pub fn artifact(&self, path: &str) -> Option<Arc<Artifact>> {
        self.state.lock().unwrap().artifacts.get(path).cloned()
    }

    pub fn add_report(&self, report: StoredReport) -> String {
        let mut s = self.state.lock().unwrap();
        s.next_report += 1;
        let id = format!("r{}", s.next_report);
        s.reports.insert(id.clone(), report);
        id
    }

    pub fn report(&self, id: &str) -> Option<StoredReport> {
        self.state.lock().unwrap().reports.get(id).cloned()
    }

    pub fn replace_report(&self, id: &str, report: StoredReport) {
        self.state.lock().unwrap().reports.insert(id.to_string(), report);
    }
}
