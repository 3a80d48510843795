//! Spectral TV transform `phi(t) = t * u_tt(t)`, band-pass filtering and
//! the full band decomposition.
//!
//! Bands are computed in telescoping form. With `D_i` the forward difference
//! `(u_{i+1} - u_i) / dt` (backward difference on the last frame), let
//! `w_i = u_i - t_i * D_i`. The band over `[t_a, t_b)` is `w_a - w_b` and the
//! residual at `t_K` is `w_K`. Since `w_0 = f`, any tiling of `[0, t_K)` plus
//! the residual sums back to `f` up to rounding.

use serde::{Deserialize, Serialize};

use super::flow::{tv_flow, FlowDiagnostics, ScaleSpaceStack, TvFlowConfig};
use super::ops::TvVariant;
use crate::error::{Error, Result};
use crate::image::{Field, GrayImage};

/// `phi(t_i, x)` per frame and the amplitude `S(t_i) = sum_x |phi(t_i, x)|`.
#[derive(Debug, Clone)]
pub struct SpectralResponse {
    pub times: Vec<f64>,
    pub phi: Vec<Field>,
    pub amplitude: Vec<f64>,
}

impl SpectralResponse {
    /// Scale of the largest amplitude sample.
    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .amplitude
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &a)| if a > best.1 { (i, a) } else { best });
        self.times[i]
    }

    /// Fraction of the total amplitude mass lying in `[lo, hi]`.
    pub fn mass_fraction(&self, lo: f64, hi: f64) -> f64 {
        let total: f64 = self.amplitude.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let inside: f64 = self
            .times
            .iter()
            .zip(&self.amplitude)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(_, a)| a)
            .sum();
        inside / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub t: f64,
    pub s: f64,
}

pub fn spectral_response(stack: &ScaleSpaceStack) -> Result<SpectralResponse> {
    let n = stack.frames.len();
    if n < 3 {
        return Err(Error::TooFewFrames(n));
    }
    let dt2 = stack.dt() * stack.dt();
    let mut phi = Vec::with_capacity(n);
    let mut amplitude = Vec::with_capacity(n);
    for (i, &t) in stack.times.iter().enumerate() {
        // Centre of the three-point stencil; one-sided at both ends.
        let c = i.clamp(1, n - 2);
        let (a, b, d) = (&stack.frames[c - 1], &stack.frames[c], &stack.frames[c + 1]);
        let data: Vec<f64> = a
            .data
            .iter()
            .zip(&b.data)
            .zip(&d.data)
            .map(|((&um, &u0), &up)| t * (up - 2.0 * u0 + um) / dt2)
            .collect();
        amplitude.push(data.iter().map(|v| v.abs()).sum());
        phi.push(Field {
            width: a.width,
            height: a.height,
            data,
        });
    }
    Ok(SpectralResponse {
        times: stack.times.clone(),
        phi,
        amplitude,
    })
}

/// Smallest frame index whose scale is `>= t`.
fn index_at_or_above(stack: &ScaleSpaceStack, t: f64) -> usize {
    ((t / stack.dt()) - 1e-9).ceil().max(0.0) as usize
}

/// `w_i = u_i - t_i * D_i`.
fn telescoped(stack: &ScaleSpaceStack, i: usize) -> Field {
    let last = stack.last_index();
    let dt = stack.dt();
    let t = stack.times[i];
    let (lo, hi) = if i < last { (i, i + 1) } else { (i - 1, i) };
    let (a, b) = (&stack.frames[lo], &stack.frames[hi]);
    let u = &stack.frames[i];
    let data = u
        .data
        .iter()
        .zip(a.data.iter().zip(&b.data))
        .map(|(&ui, (&ua, &ub))| ui - t * (ub - ua) / dt)
        .collect();
    Field {
        width: u.width,
        height: u.height,
        data,
    }
}

fn interval_indices(stack: &ScaleSpaceStack, t_lo: f64, t_hi: f64) -> Result<(usize, usize)> {
    let invalid = |reason: &str| Error::InvalidInterval {
        t_lo,
        t_hi,
        reason: reason.into(),
    };
    if !(t_lo.is_finite() && t_hi.is_finite()) || t_lo < 0.0 || t_lo >= t_hi {
        return Err(invalid("need 0 <= t_lo < t_hi"));
    }
    let t_max = stack.config.t_max;
    if t_hi > t_max + 1e-12 {
        return Err(invalid("t_hi exceeds the flow's t_max"));
    }
    let last = stack.last_index();
    let a = index_at_or_above(stack, t_lo).min(last);
    let b = index_at_or_above(stack, t_hi).min(last);
    if a >= b {
        return Err(invalid("interval contains no scale sample"));
    }
    Ok((a, b))
}

/// Band over `[t_lo, t_hi)` from an existing flow.
pub fn band_from_stack(stack: &ScaleSpaceStack, t_lo: f64, t_hi: f64) -> Result<Field> {
    let (a, b) = interval_indices(stack, t_lo, t_hi)?;
    let mut band = telescoped(stack, a);
    let upper = telescoped(stack, b);
    for (v, u) in band.data.iter_mut().zip(&upper.data) {
        *v -= u;
    }
    Ok(band)
}

/// Residual `u(t) - t * u_t(t)` at the frame at or above `t`.
pub fn residual_from_stack(stack: &ScaleSpaceStack, t: f64) -> Field {
    let i = index_at_or_above(stack, t).min(stack.last_index());
    telescoped(stack, i)
}

pub fn band_pass(f: &GrayImage, t_lo: f64, t_hi: f64, cfg: &TvFlowConfig) -> Result<Field> {
    if t_lo < 0.0 || t_lo >= t_hi || t_hi > cfg.t_max {
        return Err(Error::InvalidInterval {
            t_lo,
            t_hi,
            reason: "need 0 <= t_lo < t_hi <= t_max".into(),
        });
    }
    let stack = tv_flow(f, cfg)?;
    band_from_stack(&stack, t_lo, t_hi)
}

/// Bands over `[0, t_1), [t_1, t_2), ...` plus the residual at `t_K`.
/// Unlike a residual folded into the last band, here the residual stays
/// separate and `bands[K-1]` excludes it.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub band_edges: Vec<f64>,
    pub bands: Vec<Field>,
    pub residual: Field,
    pub mean: f64,
    pub dt: f64,
    pub variant: TvVariant,
    pub diagnostics: FlowDiagnostics,
    pub spectrum: Vec<SpectrumSample>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Field {
        let mut out = self.residual.clone();
        for b in &self.bands {
            out.add_assign(b);
        }
        out
    }
}

pub fn decompose_stack(stack: &ScaleSpaceStack, band_edges: &[f64]) -> Result<SpectralDecomposition> {
    if band_edges.is_empty() {
        return Err(Error::InvalidConfig("at least one band edge is required".into()));
    }
    if band_edges.windows(2).any(|p| p[0] >= p[1]) || band_edges[0] <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "band edges must be ascending and positive: {band_edges:?}"
        )));
    }
    let mut lower = 0.0;
    let mut bands = Vec::with_capacity(band_edges.len());
    for &edge in band_edges {
        bands.push(band_from_stack(stack, lower, edge)?);
        lower = edge;
    }
    let residual = residual_from_stack(stack, lower);
    let spectrum = match spectral_response(stack) {
        Ok(resp) => resp
            .times
            .iter()
            .zip(&resp.amplitude)
            .map(|(&t, &s)| SpectrumSample { t, s })
            .collect(),
        Err(_) => Vec::new(),
    };
    Ok(SpectralDecomposition {
        band_edges: band_edges.to_vec(),
        bands,
        residual,
        mean: stack.frames[0].mean(),
        dt: stack.dt(),
        variant: stack.config.variant,
        diagnostics: stack.diagnostics.clone(),
        spectrum,
    })
}

pub fn decompose(f: &GrayImage, band_edges: &[f64], cfg: &TvFlowConfig) -> Result<SpectralDecomposition> {
    if let Some(&last) = band_edges.last() {
        if last > cfg.t_max + 1e-12 {
            return Err(Error::InvalidInterval {
                t_lo: 0.0,
                t_hi: last,
                reason: "band edge exceeds t_max".into(),
            });
        }
    }
    let stack = tv_flow(f, cfg)?;
    decompose_stack(&stack, band_edges)
}
