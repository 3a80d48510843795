//! Discrete gradient / divergence pair with Neumann boundary and the two TV
//! functionals built on it.
//!
//! The gradient uses forward differences that vanish on the last column/row;
//! the divergence is its negative adjoint, so `sum(div p) == 0` for any `p`.

use serde::{Deserialize, Serialize};

use crate::image::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TvVariant {
    /// Rotation-invariant `sqrt(ux^2 + uy^2)`; disk-like eigen-structures.
    #[default]
    Isotropic,
    /// `|ux| + |uy|`; rectangular eigen-structures.
    Anisotropic,
}

impl std::fmt::Display for TvVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TvVariant::Isotropic => "isotropic",
            TvVariant::Anisotropic => "anisotropic",
        })
    }
}

impl std::str::FromStr for TvVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "isotropic" | "iso" => Ok(TvVariant::Isotropic),
            "anisotropic" | "aniso" => Ok(TvVariant::Anisotropic),
            other => Err(format!("unknown TV variant `{other}`")),
        }
    }
}

#[cfg(test)]
pub(crate) fn gradient(u: &[f64], w: usize, h: usize, gx: &mut [f64], gy: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            gx[i] = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            gy[i] = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

pub(crate) fn divergence(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let mut d = 0.0;
            if x + 1 < w {
                d += px[i];
            }
            if x > 0 {
                d -= px[i - 1];
            }
            if y + 1 < h {
                d += py[i];
            }
            if y > 0 {
                d -= py[i - w];
            }
            out[i] = d;
        }
    }
}

pub(crate) fn tv_of(u: &[f64], w: usize, h: usize, variant: TvVariant) -> f64 {
    let mut total = 0.0;
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let ux = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            let uy = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
            total += match variant {
                TvVariant::Isotropic => ux.hypot(uy),
                TvVariant::Anisotropic => ux.abs() + uy.abs(),
            };
        }
    }
    total
}

/// Discrete total variation with forward differences and replicate boundary.
pub fn tv_functional(u: &Field, variant: TvVariant) -> f64 {
    tv_of(&u.data, u.width, u.height, variant)
}
