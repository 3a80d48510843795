use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Orientation;
use crate::error::{Error, Result};
use crate::image::Field;

/// Rectangular pass region in the frequency domain. For vertical lines the
/// rectangle lies along the horizontal frequency axis: `width_px` rows of
/// vertical frequency (centred on zero) by `height_fraction` of the
/// horizontal frequency range on each side of zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RectFilterSpec {
    pub width_px: usize,
    pub height_fraction: f64,
    pub orientation: Orientation,
}

impl Default for RectFilterSpec {
    fn default() -> Self {
        Self {
            width_px: 1,
            height_fraction: 2.0 / 3.0,
            orientation: Orientation::Vertical,
        }
    }
}

impl RectFilterSpec {
    /// Wider, shorter mask: 3 px by a third of the axis.
    pub fn johnson(orientation: Orientation) -> Self {
        Self {
            width_px: 3,
            height_fraction: 1.0 / 3.0,
            orientation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.width_px % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "filter width must be odd and positive, got {}",
                self.width_px
            )));
        }
        if !(self.height_fraction > 0.0 && self.height_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "filter height fraction must lie in (0, 1], got {}",
                self.height_fraction
            )));
        }
        Ok(())
    }
}

fn transform_rows(data: &mut [Complex<f64>], w: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    fft.process(data);
}

fn transform_cols(data: &mut [Complex<f64>], w: usize, h: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = data[y * w + x];
        }
        fft.process(&mut col);
        for (y, c) in col.iter().enumerate() {
            data[y * w + x] = *c;
        }
    }
}

/// Unnormalised forward 2D DFT, row-major `[ky][kx]`.
pub fn fft2(img: &Field) -> Vec<Complex<f64>> {
    let (w, h) = (img.width, img.height);
    let mut data: Vec<Complex<f64>> = img.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    transform_rows(&mut data, w, &mut planner, false);
    transform_cols(&mut data, w, h, &mut planner, false);
    data
}

/// Inverse of [`fft2`], keeping the real part.
pub fn ifft2_real(mut data: Vec<Complex<f64>>, w: usize, h: usize) -> Field {
    let mut planner = FftPlanner::new();
    transform_rows(&mut data, w, &mut planner, true);
    transform_cols(&mut data, w, h, &mut planner, true);
    let norm = 1.0 / (w * h) as f64;
    Field {
        width: w,
        height: h,
        data: data.iter().map(|c| c.re * norm).collect(),
    }
}

/// Signed frequency index of DFT bin `k` of an `n`-point transform.
fn signed(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Keeps the Fourier coefficients inside the rectangle described by `spec`
/// plus the DC term and returns the real part of the inverse transform.
pub fn rect_fourier_filter(img: &Field, spec: &RectFilterSpec) -> Result<Field> {
    spec.validate()?;
    let (w, h) = (img.width, img.height);
    let mut data = fft2(img);
    let half_width = (spec.width_px - 1) as f64 / 2.0;
    for ky in 0..h {
        let fy = signed(ky, h);
        for kx in 0..w {
            let fx = signed(kx, w);
            // (along-axis frequency, across-axis frequency, along-axis length)
            let (along, across, n_along) = match spec.orientation {
                Orientation::Vertical => (fx, fy, w),
                Orientation::Horizontal => (fy, fx, h),
            };
            let keep = (kx == 0 && ky == 0)
                || (across.abs() <= half_width && along.abs() <= spec.height_fraction * n_along as f64 / 2.0);
            if !keep {
                data[ky * w + kx] = Complex::new(0.0, 0.0);
            }
        }
    }
    Ok(ifft2_real(data, w, h))
}
