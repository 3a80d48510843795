//! Chain-line and laid-line extraction.
//!
//! Chain lines: band-pass the patch, keep the line-parallel Fourier
//! components, project onto the across-line axis and pick peaks. Laid lines:
//! band-pass, find the dominant angle in the Radon domain, pick peaks in the
//! cross-section at that angle and count them in a 1 cm window.
//!
//! Both pipelines split into the flow (expensive, cacheable) and the
//! detection on an existing flow (cheap), so thresholds can be swept without
//! re-solving.

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationMethod;
use crate::image::Rect;

mod chain;
mod laid;
mod overlay;
mod peaks;

pub use chain::{chain_report_from_stack, detect_chain_lines, ChainLineReport, ChainParams};
pub use laid::{detect_laid_lines, laid_report_from_stack, laid_window_px, LaidLineReport, LaidParams};
pub use overlay::{render_overlay, OverlayReport, DETECTED_COLOUR, OMITTED_COLOUR, WINDOW_COLOUR};
pub use peaks::{detect_peaks, find_peaks, smooth_1d, PeakConfig, Threshold};

/// Version of the report JSON layout.
pub const REPORT_SCHEMA: u32 = 1;

/// Chain-line spacing in mm outside which a report is flagged.
pub const PLAUSIBLE_CHAIN_MM: (f64, f64) = (15.0, 50.0);
/// Laid-line density per cm outside which a report is flagged.
pub const PLAUSIBLE_LAID_PER_CM: (f64, f64) = (5.0, 15.0);

/// Where a report's numbers came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    /// Patch rectangle in source image pixels; positions are relative to it.
    pub patch: Option<Rect>,
    pub calibration_method: Option<CalibrationMethod>,
}
