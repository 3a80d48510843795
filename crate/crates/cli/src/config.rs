use std::path::{Path, PathBuf};

use mouldprint::detect::{ChainParams, LaidParams, PeakConfig, Threshold};
use mouldprint::{CalibrationSource, Orientation, Rect, RectFilterSpec, TvFlowConfig, TvVariant};
use serde::{Deserialize, Serialize};

/// Run settings from a JSON config file or from flags. Every field is
/// optional; flags override the file and the file overrides the built-in
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub patch: Option<Rect>,
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
    pub band_edges: Option<Vec<f64>>,
    pub variant: Option<TvVariant>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub inner_tol: Option<f64>,
    pub inner_max_iter: Option<usize>,
    pub orientation: Option<Orientation>,
    pub filter_width_px: Option<usize>,
    pub filter_height_fraction: Option<f64>,
    pub smooth_sigma: Option<f64>,
    pub threshold: Option<Threshold>,
    pub min_separation: Option<usize>,
    pub angle_step_deg: Option<f64>,
    pub window_anchor_px: Option<f64>,
    pub calibration: Option<CalibrationSource>,
    pub omit: Option<Vec<usize>>,
    pub strict: Option<bool>,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($f:ident),*) => {
        RunConfig { $($f: $a.$f.or($b.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        let a = self;
        let b = base;
        prefer!(a, b; input, output, patch, t_lo, t_hi, band_edges, variant, dt, t_max, inner_tol,
            inner_max_iter, orientation, filter_width_px, filter_height_fraction, smooth_sigma,
            threshold, min_separation, angle_step_deg, window_anchor_px, calibration, omit, strict)
    }

    pub fn flow(&self) -> TvFlowConfig {
        let d = TvFlowConfig::default();
        TvFlowConfig {
            dt: self.dt.unwrap_or(d.dt),
            t_max: self.t_max.unwrap_or(d.t_max),
            variant: self.variant.unwrap_or(d.variant),
            inner_tol: self.inner_tol.unwrap_or(d.inner_tol),
            inner_max_iter: self.inner_max_iter.unwrap_or(d.inner_max_iter),
        }
    }

    fn peaks(&self, d: PeakConfig) -> PeakConfig {
        PeakConfig {
            smooth_sigma: self.smooth_sigma.unwrap_or(d.smooth_sigma),
            threshold: self.threshold.unwrap_or(d.threshold),
            min_separation: self.min_separation.unwrap_or(d.min_separation),
        }
    }

    pub fn chain_params(&self) -> ChainParams {
        let d = ChainParams::default();
        ChainParams {
            t_lo: self.t_lo.unwrap_or(d.t_lo),
            t_hi: self.t_hi.unwrap_or(d.t_hi),
            flow: self.flow(),
            filter: RectFilterSpec {
                width_px: self.filter_width_px.unwrap_or(d.filter.width_px),
                height_fraction: self.filter_height_fraction.unwrap_or(d.filter.height_fraction),
                orientation: self.orientation.unwrap_or(d.filter.orientation),
            },
            peaks: self.peaks(d.peaks),
        }
    }

    pub fn laid_params(&self) -> LaidParams {
        let d = LaidParams::default();
        LaidParams {
            t_lo: self.t_lo.unwrap_or(d.t_lo),
            t_hi: self.t_hi.unwrap_or(d.t_hi),
            flow: self.flow(),
            angle_step_deg: self.angle_step_deg.unwrap_or(d.angle_step_deg),
            peaks: self.peaks(d.peaks),
            window_anchor_px: self.window_anchor_px.or(d.window_anchor_px),
        }
    }

    /// Band edges for a decomposition: explicit edges, else `t_lo` (when
    /// positive) and `t_hi` from the detection band.
    pub fn decomposition_edges(&self) -> Vec<f64> {
        if let Some(edges) = &self.band_edges {
            return edges.clone();
        }
        let d = ChainParams::default();
        let (lo, hi) = (self.t_lo.unwrap_or(d.t_lo), self.t_hi.unwrap_or(d.t_hi));
        if lo > 0.0 {
            vec![lo, hi]
        } else {
            vec![hi]
        }
    }
}
