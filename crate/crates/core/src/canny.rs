//! Canny edge detection on `[0, 1]` intensity images.
//!
//! Stages: separable Gaussian smoothing (replicate boundary), Sobel gradient,
//! non-maximum suppression along the quantised gradient direction, and
//! hysteresis thresholding. Thresholds are fractions of the maximum gradient
//! magnitude, so results are invariant to a uniform intensity scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{EdgeMask, Field, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            low: 0.1,
            high: 0.2,
        }
    }
}

/// Normalised Gaussian kernel truncated at `4 * sigma`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

fn convolve_rows(src: &Field, kernel: &[f64]) -> Field {
    let r = (kernel.len() / 2) as i64;
    let (w, h) = (src.width as i64, src.height);
    let mut out = Field::zeros(src.width, h);
    for y in 0..h {
        let row = &src.data[y * src.width..(y + 1) * src.width];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let xx = (x + k as i64 - r).clamp(0, w - 1) as usize;
                acc += weight * row[xx];
            }
            out.data[y * src.width + x as usize] = acc;
        }
    }
    out
}

fn convolve_cols(src: &Field, kernel: &[f64]) -> Field {
    let r = (kernel.len() / 2) as i64;
    let (w, h) = (src.width, src.height as i64);
    let mut out = Field::zeros(w, src.height);
    for y in 0..h {
        for (k, weight) in kernel.iter().enumerate() {
            let yy = (y + k as i64 - r).clamp(0, h - 1) as usize;
            let src_row = &src.data[yy * w..(yy + 1) * w];
            let dst_row = &mut out.data[y as usize * w..(y as usize + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += weight * s;
            }
        }
    }
    out
}

pub(crate) fn gaussian_blur(src: &Field, sigma: f64) -> Field {
    if sigma <= 0.0 {
        return src.clone();
    }
    let k = gaussian_kernel(sigma);
    convolve_cols(&convolve_rows(src, &k), &k)
}

pub fn canny_edges(img: &GrayImage, sigma: f64, low: f64, high: f64) -> Result<EdgeMask> {
    if !(low >= 0.0 && low <= high) {
        return Err(Error::InvalidThreshold { low, high });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("canny sigma must be positive, got {sigma}")));
    }
    let (w, h) = (img.width(), img.height());
    let smooth = gaussian_blur(&img.to_field(), sigma);

    let at = |x: i64, y: i64| -> f64 {
        let xx = x.clamp(0, w as i64 - 1) as usize;
        let yy = y.clamp(0, h as i64 - 1) as usize;
        smooth.data[yy * w + xx]
    };
    let mut mag = vec![0.0; w * h];
    let mut dir = vec![0u8; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            mag[i] = gx.hypot(gy);
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            dir[i] = match angle {
                a if !(22.5..157.5).contains(&a) => 0,
                a if a < 67.5 => 1,
                a if a < 112.5 => 2,
                _ => 3,
            };
        }
    }

    let max_mag = mag.iter().cloned().fold(0.0, f64::max);
    let mut mask = EdgeMask::empty(w, h);
    // Rounding noise on flat images must not turn into edges.
    if max_mag < 1e-9 {
        return Ok(mask);
    }
    let (lo_t, hi_t) = (low * max_mag, high * max_mag);

    let mag_at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    // Ties across a symmetric step resolve toward the positive side so that
    // an ideal step yields a one-pixel-wide edge.
    let eps = 1e-9 * max_mag;
    let mut thin = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let ((px, py), (nx, ny)) = match dir[i] {
                0 => ((x - 1, y), (x + 1, y)),
                1 => ((x - 1, y - 1), (x + 1, y + 1)),
                2 => ((x, y - 1), (x, y + 1)),
                _ => ((x + 1, y - 1), (x - 1, y + 1)),
            };
            if m >= mag_at(px, py) - eps && m > mag_at(nx, ny) + eps {
                thin[i] = m;
            }
        }
    }

    let mut stack: Vec<usize> = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m > 0.0 && m >= hi_t && !mask.data[i] {
            mask.data[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (jx, jy) = ((j % w) as i64, (j / w) as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (xx, yy) = (jx + dx, jy + dy);
                        if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                            continue;
                        }
                        let k = yy as usize * w + xx as usize;
                        if !mask.data[k] && thin[k] > 0.0 && thin[k] >= lo_t {
                            mask.data[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    Ok(mask)
}
