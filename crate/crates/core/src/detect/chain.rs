use serde::{Deserialize, Serialize};

use super::peaks::{detect_peaks, smooth_1d, PeakConfig};
use super::{Provenance, PLAUSIBLE_CHAIN_MM, REPORT_SCHEMA};
use crate::calibrate::Calibration;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::spectral::{band_from_stack, tv_flow, ScaleSpaceStack, TvFlowConfig};
use crate::transforms::{project, rect_fourier_filter, Orientation, RectFilterSpec};

/// Every knob of the chain-line pipeline; echoed in the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainParams {
    pub t_lo: f64,
    pub t_hi: f64,
    pub flow: TvFlowConfig,
    pub filter: RectFilterSpec,
    pub peaks: PeakConfig,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            t_lo: 0.026,
            t_hi: 1.0,
            flow: TvFlowConfig::default(),
            filter: RectFilterSpec::default(),
            peaks: PeakConfig::chain(),
        }
    }
}

pub(crate) fn validate_band(t_lo: f64, t_hi: f64, flow: &TvFlowConfig) -> Result<()> {
    flow.validate()?;
    if !(t_lo >= 0.0 && t_lo < t_hi && t_hi <= flow.t_max + 1e-12) {
        return Err(Error::InvalidInterval {
            t_lo,
            t_hi,
            reason: format!("need 0 <= t_lo < t_hi <= t_max = {}", flow.t_max),
        });
    }
    Ok(())
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        validate_band(self.t_lo, self.t_hi, &self.flow)?;
        self.filter.validate()?;
        self.peaks.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLineReport {
    pub schema: u32,
    pub orientation: Orientation,
    /// Line coordinates in patch pixels (columns for vertical lines),
    /// ascending; omitted lines stay listed.
    pub positions_px: Vec<f64>,
    pub omitted_indices: Vec<usize>,
    /// Gaps between consecutive kept lines.
    pub distances_px: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances_mm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_distance_mm: Option<f64>,
    /// Some distance lies outside the plausible chain spacing.
    pub implausible: bool,
    /// Distances are measured on the projection, i.e. averaged over the
    /// patch extent along the lines.
    pub measured_on: String,
    /// Smoothed projection the peaks were picked from.
    pub signal: Vec<f64>,
    pub threshold_level: f64,
    pub solver_converged: bool,
    pub warnings: Vec<String>,
    pub params: ChainParams,
    pub calibration: Option<Calibration>,
    pub provenance: Provenance,
}

impl ChainLineReport {
    pub fn kept_positions(&self) -> Vec<f64> {
        self.positions_px
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.omitted_indices.contains(i))
            .map(|(_, p)| *p)
            .collect()
    }

    /// A new report with `omitted` excluded from the distances. Replaces any
    /// earlier omission set.
    pub fn with_omitted(&self, omitted: &[usize]) -> Result<Self> {
        if let Some(&bad) = omitted.iter().find(|&&i| i >= self.positions_px.len()) {
            return Err(Error::InvalidConfig(format!(
                "cannot omit line {bad}: only {} lines detected",
                self.positions_px.len()
            )));
        }
        let mut out = self.clone();
        out.omitted_indices = omitted.to_vec();
        out.omitted_indices.sort_unstable();
        out.omitted_indices.dedup();
        out.recompute();
        Ok(out)
    }

    /// Derives distances, the plausibility flag and warnings from the
    /// positions, omissions and calibration.
    fn recompute(&mut self) {
        let kept = self.kept_positions();
        self.distances_px = kept.windows(2).map(|p| p[1] - p[0]).collect();
        self.distances_mm = self
            .calibration
            .as_ref()
            .map(|c| self.distances_px.iter().map(|&d| c.px_to_mm(d)).collect::<Vec<_>>());
        self.mean_distance_mm = self
            .distances_mm
            .as_ref()
            .filter(|d| !d.is_empty())
            .map(|d| d.iter().sum::<f64>() / d.len() as f64);
        let (lo, hi) = PLAUSIBLE_CHAIN_MM;
        self.implausible = self
            .distances_mm
            .as_ref()
            .is_some_and(|d| d.iter().any(|&v| !(lo..=hi).contains(&v)));

        let mut warnings = Vec::new();
        if !self.solver_converged {
            warnings.push("TV flow did not converge on every step".to_string());
        }
        if self.calibration.is_none() {
            warnings.push("no calibration: distances in mm omitted".to_string());
        }
        if self.positions_px.is_empty() {
            warnings.push("no lines found".to_string());
        } else if kept.len() < 2 {
            warnings.push("fewer than two lines kept: no distances".to_string());
        }
        if self.implausible {
            warnings.push(format!("chain line distance outside {lo}-{hi} mm"));
        }
        self.warnings = warnings;
    }
}

/// Chain-line detection on an existing flow of the patch. An empty result
/// is a valid report.
pub fn chain_report_from_stack(
    stack: &ScaleSpaceStack,
    params: &ChainParams,
    calibration: Option<&Calibration>,
) -> Result<ChainLineReport> {
    params.validate()?;
    let band = band_from_stack(stack, params.t_lo, params.t_hi)?;
    let filtered = rect_fourier_filter(&band, &params.filter)?;
    let raw = project(&filtered, params.filter.orientation);
    let signal = smooth_1d(&raw, params.peaks.smooth_sigma);
    let threshold_level = params.peaks.threshold.level(&signal);
    let positions_px = detect_peaks(&raw, &params.peaks).into_iter().map(|i| i as f64).collect();
    let mut report = ChainLineReport {
        schema: REPORT_SCHEMA,
        orientation: params.filter.orientation,
        positions_px,
        omitted_indices: Vec::new(),
        distances_px: Vec::new(),
        distances_mm: None,
        mean_distance_mm: None,
        implausible: false,
        measured_on: "projection averaged over the patch".to_string(),
        signal,
        threshold_level,
        solver_converged: stack.diagnostics.converged(),
        warnings: Vec::new(),
        params: *params,
        calibration: calibration.cloned(),
        provenance: Provenance {
            calibration_method: calibration.map(|c| c.method),
            ..Provenance::default()
        },
    };
    report.recompute();
    Ok(report)
}

/// Full chain-line pipeline on a patch.
pub fn detect_chain_lines(
    patch: &GrayImage,
    params: &ChainParams,
    calibration: Option<&Calibration>,
) -> Result<ChainLineReport> {
    params.validate()?;
    let stack = tv_flow(patch, &params.flow)?;
    let report = chain_report_from_stack(&stack, params, calibration)?;
    if report.positions_px.is_empty() {
        return Err(Error::NoLinesFound);
    }
    Ok(report)
}
