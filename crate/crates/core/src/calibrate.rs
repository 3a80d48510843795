//! Pixel-size calibration from ruler ticks or from the known paper height.

use serde::{Deserialize, Serialize};

use crate::canny::{canny_edges, CannyParams};
use crate::error::{Error, Result};
use crate::image::{EdgeMask, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    Ruler,
    PaperSize,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub pixels_per_mm: f64,
    pub method: CalibrationMethod,
    pub confidence_note: String,
}

impl Calibration {
    pub fn explicit(pixels_per_mm: f64) -> Result<Self> {
        if !(pixels_per_mm.is_finite() && pixels_per_mm > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pixels_per_mm must be positive, got {pixels_per_mm}"
            )));
        }
        Ok(Self {
            pixels_per_mm,
            method: CalibrationMethod::Explicit,
            confidence_note: "user supplied".into(),
        })
    }

    pub fn px_to_mm(&self, px: f64) -> f64 {
        px / self.pixels_per_mm
    }
}

/// Direction along which ruler ticks are laid out. `Horizontal` means the
/// ticks are vertical strokes arranged left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Fraction of the strongest tick profile a column must reach to count.
const TICK_PROFILE_FRACTION: f64 = 0.5;
/// Gap ratio above which small gaps are treated as the two flanks of one tick.
const FLANK_GAP_RATIO: f64 = 2.5;
/// A ruler's gaps agree; edge clutter from noise or text does not. At least
/// half of the gaps must lie within this relative distance of the median.
const TICK_GAP_TOLERANCE: f64 = 0.15;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Centres of runs of consecutive `true` entries.
fn run_centres(flags: &[bool]) -> Vec<f64> {
    let mut centres = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                centres.push(0.5 * (s + i - 1) as f64);
                start = None;
            }
            _ => {}
        }
    }
    centres
}

/// Canny marks both flanks of a tick stroke; merge those pairs into one
/// centre when the gap distribution is clearly bimodal.
fn merge_flanks(centres: Vec<f64>) -> Vec<f64> {
    if centres.len() < 3 {
        return centres;
    }
    let mut gaps: Vec<f64> = centres.windows(2).map(|p| p[1] - p[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let split = gaps
        .windows(2)
        .filter(|g| g[1] / g[0] > FLANK_GAP_RATIO)
        .map(|g| g[0])
        .next();
    let Some(small) = split else {
        return centres;
    };
    let mut merged = Vec::new();
    let mut group = vec![centres[0]];
    for pair in centres.windows(2) {
        if pair[1] - pair[0] <= small {
            group.push(pair[1]);
        } else {
            merged.push(group.iter().sum::<f64>() / group.len() as f64);
            group = vec![pair[1]];
        }
    }
    merged.push(group.iter().sum::<f64>() / group.len() as f64);
    merged
}

/// Tick line positions along `axis`, in pixels.
pub fn tick_positions(edges: &EdgeMask, axis: Axis) -> Vec<f64> {
    let (w, h) = (edges.width, edges.height);
    let profile: Vec<usize> = match axis {
        Axis::Horizontal => (0..w)
            .map(|x| (0..h).filter(|&y| edges.get(x, y)).count())
            .collect(),
        Axis::Vertical => (0..h)
            .map(|y| (0..w).filter(|&x| edges.get(x, y)).count())
            .collect(),
    };
    let peak = profile.iter().copied().max().unwrap_or(0);
    if peak < 2 {
        return Vec::new();
    }
    let cut = ((peak as f64) * TICK_PROFILE_FRACTION).max(2.0);
    let flags: Vec<bool> = profile.iter().map(|&c| c as f64 >= cut).collect();
    merge_flanks(run_centres(&flags))
}

pub fn calibrate_from_ruler(edges: &EdgeMask, tick_spacing_mm: f64, axis: Axis) -> Result<Calibration> {
    if !(tick_spacing_mm.is_finite() && tick_spacing_mm > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tick spacing must be positive, got {tick_spacing_mm}"
        )));
    }
    let ticks = tick_positions(edges, axis);
    calibrate_from_ticks(&ticks, tick_spacing_mm)
}

/// Median consecutive gap over `tick_spacing_mm`.
pub fn calibrate_from_ticks(ticks: &[f64], tick_spacing_mm: f64) -> Result<Calibration> {
    if ticks.len() < 2 {
        return Err(Error::InsufficientTicks { found: ticks.len() });
    }
    let mut gaps: Vec<f64> = ticks.windows(2).map(|p| p[1] - p[0]).collect();
    let gap = median(&mut gaps);
    let consistent = gaps.iter().filter(|g| (*g - gap).abs() <= TICK_GAP_TOLERANCE * gap).count();
    if 2 * consistent < gaps.len() {
        return Err(Error::IrregularTicks {
            gaps: gaps.len(),
            consistent,
        });
    }
    Ok(Calibration {
        pixels_per_mm: gap / tick_spacing_mm,
        method: CalibrationMethod::Ruler,
        confidence_note: format!("median of {} tick gaps", ticks.len() - 1),
    })
}

/// Longest horizontal run of edge pixels in a row, tolerating one-pixel
/// vertical wobble and gaps up to two pixels.
fn longest_run(edges: &EdgeMask, y: usize) -> usize {
    let (w, h) = (edges.width, edges.height);
    let (lo, hi) = (y.saturating_sub(1), (y + 1).min(h - 1));
    let hit = |x: usize| (lo..=hi).any(|yy| edges.get(x, yy));
    let mut best = 0;
    let mut start: Option<usize> = None;
    let mut last_hit = 0;
    for x in 0..w {
        if hit(x) {
            if start.is_none() || x - last_hit > 3 {
                start = Some(x);
            }
            last_hit = x;
            best = best.max(x - start.unwrap() + 1);
        }
    }
    best
}

pub fn calibrate_from_paper_size(edges: &EdgeMask, paper_height_mm: f64) -> Result<Calibration> {
    if !(paper_height_mm.is_finite() && paper_height_mm > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "paper height must be positive, got {paper_height_mm}"
        )));
    }
    let runs: Vec<usize> = (0..edges.height).map(|y| longest_run(edges, y)).collect();
    let longest = runs.iter().copied().max().unwrap_or(0);
    // A paper edge has to span a good part of the image width.
    let min_len = (edges.width / 4).max(8);
    if longest < min_len {
        return Err(Error::EdgesNotFound { found: 0 });
    }
    let cut = (longest as f64 * 0.5).max(min_len as f64);
    let flags: Vec<bool> = runs.iter().map(|&r| r as f64 >= cut).collect();
    let rows = run_centres(&flags);
    if rows.len() < 2 {
        return Err(Error::EdgesNotFound { found: rows.len() });
    }
    let (top, bottom) = (rows[0], rows[rows.len() - 1]);
    Ok(Calibration {
        pixels_per_mm: (bottom - top) / paper_height_mm,
        method: CalibrationMethod::PaperSize,
        confidence_note: format!("paper edges at rows {top} and {bottom}; no dewarping"),
    })
}

fn default_axis() -> Axis {
    Axis::Horizontal
}

/// How to obtain the pixel size for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationSource {
    Ruler {
        tick_spacing_mm: f64,
        #[serde(default = "default_axis")]
        axis: Axis,
        #[serde(default)]
        canny: CannyParams,
    },
    PaperSize {
        paper_height_mm: f64,
        #[serde(default)]
        canny: CannyParams,
    },
    Explicit {
        pixels_per_mm: f64,
    },
}

impl CalibrationSource {
    /// Calibrates from `img`, which should be the whole photograph rather
    /// than the analysis patch.
    pub fn calibrate(&self, img: &GrayImage) -> Result<Calibration> {
        match *self {
            CalibrationSource::Ruler {
                tick_spacing_mm,
                axis,
                canny,
            } => {
                let edges = canny_edges(img, canny.sigma, canny.low, canny.high)?;
                calibrate_from_ruler(&edges, tick_spacing_mm, axis)
            }
            CalibrationSource::PaperSize { paper_height_mm, canny } => {
                let edges = canny_edges(img, canny.sigma, canny.low, canny.high)?;
                calibrate_from_paper_size(&edges, paper_height_mm)
            }
            CalibrationSource::Explicit { pixels_per_mm } => Calibration::explicit(pixels_per_mm),
        }
    }
}
