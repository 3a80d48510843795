use serde::{Deserialize, Serialize};

use crate::canny::gaussian_kernel;
use crate::error::{Error, Result};

/// Gaussian smoothing with the kernel truncated at `4 sigma` and
/// renormalised; samples beyond the ends repeat the end values.
pub fn smooth_1d(signal: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || signal.is_empty() {
        return signal.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let last = signal.len() as i64 - 1;
    (0..signal.len() as i64)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * signal[(i + k as i64 - r).clamp(0, last) as usize])
                .sum()
        })
        .collect()
}

/// Peak threshold on the smoothed signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    Absolute(f64),
    /// Fraction of the highest local maximum of the smoothed signal. The
    /// end samples are not local maxima, so a ramp at a truncated border
    /// cannot lift the threshold above every line.
    FractionOfMax(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::FractionOfMax(0.5)
    }
}

impl Threshold {
    /// Absolute level for an already smoothed signal.
    pub fn level(&self, smoothed: &[f64]) -> f64 {
        match *self {
            Threshold::Absolute(v) => v,
            Threshold::FractionOfMax(f) => f * highest_local_max(smoothed).unwrap_or(0.0),
        }
    }

    /// [`Threshold::level`] where the outermost local maximum at each end
    /// does not set the fraction, provided three or more exist. A line at
    /// the patch border merges with the gap beside it, gains scale and comes
    /// out brighter in the band than the lines inside.
    pub fn level_inner(&self, smoothed: &[f64]) -> f64 {
        match *self {
            Threshold::Absolute(v) => v,
            Threshold::FractionOfMax(f) => {
                let maxima: Vec<f64> = (1..smoothed.len().saturating_sub(1))
                    .filter(|&i| is_local_max(smoothed, i))
                    .map(|i| smoothed[i])
                    .collect();
                let inner = if maxima.len() >= 3 { &maxima[1..maxima.len() - 1] } else { &maxima[..] };
                f * inner.iter().copied().reduce(f64::max).unwrap_or(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakConfig {
    pub smooth_sigma: f64,
    pub threshold: Threshold,
    pub min_separation: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self::chain()
    }
}

impl PeakConfig {
    pub fn chain() -> Self {
        Self {
            smooth_sigma: 2.0,
            threshold: Threshold::default(),
            min_separation: 5,
        }
    }

    pub fn laid() -> Self {
        Self {
            smooth_sigma: 1.0,
            threshold: Threshold::default(),
            min_separation: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.smooth_sigma.is_finite() && self.smooth_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "smooth_sigma must be non-negative, got {}",
                self.smooth_sigma
            )));
        }
        let t = match self.threshold {
            Threshold::Absolute(v) | Threshold::FractionOfMax(v) => v,
        };
        if !t.is_finite() {
            return Err(Error::InvalidConfig(format!("threshold must be finite, got {t}")));
        }
        if self.min_separation == 0 {
            return Err(Error::InvalidConfig("min_separation must be at least 1".into()));
        }
        Ok(())
    }
}

fn is_local_max(s: &[f64], i: usize) -> bool {
    s[i] > s[i - 1] && s[i] >= s[i + 1]
}

fn highest_local_max(s: &[f64]) -> Option<f64> {
    (1..s.len().saturating_sub(1))
        .filter(|&i| is_local_max(s, i))
        .map(|i| s[i])
        .reduce(f64::max)
}

/// Peaks of an already smoothed signal: strict rise from the left, no rise
/// to the right, at or above `level`. Among peaks closer than
/// `min_separation` the higher one wins, ties going to the leftmost.
pub fn find_peaks(smoothed: &[f64], level: f64, min_separation: usize) -> Vec<usize> {
    let n = smoothed.len();
    if n < 3 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| is_local_max(smoothed, i) && smoothed[i] >= level)
        .collect();
    candidates.sort_by(|&a, &b| smoothed[b].total_cmp(&smoothed[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= min_separation) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Smooths `signal` and returns its peak indices in ascending order.
pub fn detect_peaks(signal: &[f64], cfg: &PeakConfig) -> Vec<usize> {
    let smoothed = smooth_1d(signal, cfg.smooth_sigma);
    find_peaks(&smoothed, cfg.threshold.level(&smoothed), cfg.min_separation)
}
