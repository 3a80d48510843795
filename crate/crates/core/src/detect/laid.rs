use serde::{Deserialize, Serialize};

use super::chain::validate_band;
use super::peaks::{find_peaks, smooth_1d, PeakConfig};
use super::{Provenance, PLAUSIBLE_LAID_PER_CM, REPORT_SCHEMA};
use crate::calibrate::Calibration;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::spectral::{band_from_stack, tv_flow, ScaleSpaceStack, TvFlowConfig};
use crate::transforms::{default_angles, dominant_angle, radon, radon_preview};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaidParams {
    pub t_lo: f64,
    pub t_hi: f64,
    pub flow: TvFlowConfig,
    pub angle_step_deg: f64,
    pub peaks: PeakConfig,
    /// Start of the 1 cm window along the cross-section, in pixels from the
    /// patch centre. `None` centres it and snaps it between lines.
    pub window_anchor_px: Option<f64>,
}

impl Default for LaidParams {
    fn default() -> Self {
        Self {
            t_lo: 0.026,
            t_hi: 1.0,
            flow: TvFlowConfig::default(),
            angle_step_deg: 0.5,
            peaks: PeakConfig::laid(),
            window_anchor_px: None,
        }
    }
}

impl LaidParams {
    pub fn validate(&self) -> Result<()> {
        validate_band(self.t_lo, self.t_hi, &self.flow)?;
        if !(self.angle_step_deg > 0.0 && self.angle_step_deg <= 45.0) {
            return Err(Error::InvalidConfig(format!(
                "angle step must lie in (0, 45] degrees, got {}",
                self.angle_step_deg
            )));
        }
        if self.window_anchor_px.is_some_and(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig("window anchor must be finite".into()));
        }
        self.peaks.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaidLineReport {
    pub schema: u32,
    /// Radon angle of the lines: 0 is vertical, 90 horizontal.
    pub angle_deg: f64,
    pub angle_confidence: f64,
    pub low_confidence: bool,
    /// Line offsets along the cross-section, in pixels from the patch centre.
    pub positions_px: Vec<f64>,
    /// Consecutive gaps. Lines are placed at profile centres, so these are
    /// approximate.
    pub line_distances_mm: Vec<f64>,
    pub distances_approximate: bool,
    pub density_per_cm: usize,
    pub window_anchor_px: f64,
    pub window_length_px: f64,
    pub anchor_snapped: bool,
    pub implausible: bool,
    /// Smoothed cross-section; sample `k` sits at `signal_offset0 + k`.
    pub signal: Vec<f64>,
    pub signal_offset0: f64,
    pub threshold_level: f64,
    pub solver_converged: bool,
    pub warnings: Vec<String>,
    pub params: LaidParams,
    pub calibration: Calibration,
    pub provenance: Provenance,
}

impl LaidLineReport {
    /// Cross-section span covered by the signal.
    pub fn signal_span(&self) -> (f64, f64) {
        (self.signal_offset0, self.signal_offset0 + self.signal.len().saturating_sub(1) as f64)
    }

    /// A new report with the window moved to `anchor_px`; lines are not
    /// re-detected.
    pub fn with_anchor(&self, anchor_px: f64) -> Result<Self> {
        let mut out = self.clone();
        out.params.window_anchor_px = Some(anchor_px);
        out.place_window(Some(anchor_px))?;
        Ok(out)
    }

    fn place_window(&mut self, requested: Option<f64>) -> Result<()> {
        let len = self.window_length_px;
        let (lo, hi) = self.signal_span();
        if hi - lo + 1.0 < len {
            return Err(Error::PatchTooSmall {
                extent_px: (hi - lo + 1.0) as usize,
                required_px: len,
            });
        }
        let (anchor, snapped) = match requested {
            Some(a) => (a, false),
            None => snap_between(&self.positions_px, -len / 2.0),
        };
        // Keep the window on the measured cross-section.
        let clamped = anchor.clamp(lo, hi + 1.0 - len);
        self.window_anchor_px = clamped;
        self.anchor_snapped = snapped;
        self.density_per_cm = self
            .positions_px
            .iter()
            .filter(|&&p| p >= clamped && p < clamped + len)
            .count();
        let (dlo, dhi) = PLAUSIBLE_LAID_PER_CM;
        self.implausible = !(dlo..=dhi).contains(&(self.density_per_cm as f64));

        let mut warnings = Vec::new();
        if !self.solver_converged {
            warnings.push("TV flow did not converge on every step".to_string());
        }
        if self.low_confidence {
            warnings.push("dominant angle is low confidence".to_string());
        }
        if clamped != anchor {
            warnings.push(format!("window moved from {anchor:.1} px to stay on the cross-section"));
        }
        if self.positions_px.is_empty() {
            warnings.push("no lines found".to_string());
        }
        if self.implausible {
            warnings.push(format!("laid line density outside {dlo}-{dhi} per cm"));
        }
        self.warnings = warnings;
        Ok(())
    }
}

/// Moves `start` to the midpoint of the two lines around it, so jitter in
/// line positions cannot push a line across the window edge.
fn snap_between(positions: &[f64], start: f64) -> (f64, bool) {
    positions
        .windows(2)
        .find(|p| p[0] <= start && start < p[1])
        .map_or((start, false), |p| (0.5 * (p[0] + p[1]), true))
}

/// Window length for a `width` x `height` patch; fails when the patch cannot
/// hold 1 cm in both directions.
pub fn laid_window_px(width: usize, height: usize, cal: &Calibration) -> Result<f64> {
    let len = 10.0 * cal.pixels_per_mm;
    let extent = width.min(height);
    if (extent as f64) < len {
        return Err(Error::PatchTooSmall {
            extent_px: extent,
            required_px: len,
        });
    }
    Ok(len)
}

/// Laid-line detection on an existing flow of the patch.
pub fn laid_report_from_stack(
    stack: &ScaleSpaceStack,
    params: &LaidParams,
    calibration: &Calibration,
) -> Result<LaidLineReport> {
    params.validate()?;
    let window_length_px = laid_window_px(stack.width(), stack.height(), calibration)?;
    let band = band_from_stack(stack, params.t_lo, params.t_hi)?;
    // Angles are compared on the cheap transform; only the winning
    // cross-section is taken at full sampling.
    let est = dominant_angle(&radon_preview(&band, &default_angles(params.angle_step_deg)));
    let sino = radon(&band, &[est.angle_deg]);

    // Ray means over rays spanning at least half the longest chord; shorter
    // rays near the corners are too noisy to compare.
    let col = sino.column(0);
    let cov = sino.coverage_column(0);
    let longest = cov.iter().copied().fold(0.0, f64::max);
    let valid: Vec<usize> = (0..cov.len()).filter(|&i| cov[i] >= 0.5 * longest && cov[i] > 0.0).collect();
    let (i0, i1) = (valid[0], valid[valid.len() - 1]);
    let means: Vec<f64> = (i0..=i1).map(|i| if cov[i] > 0.0 { col[i] / cov[i] } else { 0.0 }).collect();
    let signal = smooth_1d(&means, params.peaks.smooth_sigma);
    let threshold_level = params.peaks.threshold.level_inner(&signal);
    let positions_px: Vec<f64> = find_peaks(&signal, threshold_level, params.peaks.min_separation)
        .into_iter()
        .map(|k| sino.offsets[i0 + k])
        .collect();
    let line_distances_mm = positions_px
        .windows(2)
        .map(|p| calibration.px_to_mm(p[1] - p[0]))
        .collect();

    let mut report = LaidLineReport {
        schema: REPORT_SCHEMA,
        angle_deg: est.angle_deg,
        angle_confidence: est.confidence,
        low_confidence: est.low_confidence,
        positions_px,
        line_distances_mm,
        distances_approximate: true,
        density_per_cm: 0,
        window_anchor_px: 0.0,
        window_length_px,
        anchor_snapped: false,
        implausible: false,
        signal,
        signal_offset0: sino.offsets[i0],
        threshold_level,
        solver_converged: stack.diagnostics.converged(),
        warnings: Vec::new(),
        params: *params,
        calibration: calibration.clone(),
        provenance: Provenance {
            calibration_method: Some(calibration.method),
            ..Provenance::default()
        },
    };
    report.place_window(params.window_anchor_px)?;
    Ok(report)
}

/// Full laid-line pipeline on a patch.
pub fn detect_laid_lines(
    patch: &GrayImage,
    params: &LaidParams,
    calibration: Option<&Calibration>,
) -> Result<LaidLineReport> {
    let cal = calibration.ok_or(Error::MissingCalibration)?;
    params.validate()?;
    laid_window_px(patch.width(), patch.height(), cal)?;
    let stack = tv_flow(patch, &params.flow)?;
    let report = laid_report_from_stack(&stack, params, cal)?;
    if report.positions_px.is_empty() {
        return Err(Error::NoLinesFound);
    }
    Ok(report)
}
