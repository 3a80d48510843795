//! Radon transform by pixel-driven projection.
//!
//! Angle convention: the ray at angle `a` and offset `s` is the line through
//! `c + s * (cos a, sin a)` with direction `(-sin a, cos a)`, where `c` is the
//! image centre and `y` points down. A vertical line therefore responds at
//! 0 degrees and a horizontal one at 90 degrees; `s` is the signed distance
//! from the centre along the normal. This equals rotating the image by `-a`
//! about its centre and summing columns.
//!
//! Offsets extend across the whole diagonal, so no mass is lost at any
//! angle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::image::Field;

/// Projections indexed by `(angle, offset)`, angle-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    /// Degrees, in the order given to [`radon`].
    pub angles: Vec<f64>,
    /// Pixels from the image centre along the ray normal, unit-spaced and
    /// aligned so that 0-degree rays pass through pixel centres.
    pub offsets: Vec<f64>,
    pub data: Vec<f64>,
    /// Radon transform of the image support: the chord length of each ray.
    pub coverage: Vec<f64>,
}

impl Sinogram {
    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn n_offsets(&self) -> usize {
        self.offsets.len()
    }

    pub fn column(&self, angle_index: usize) -> &[f64] {
        let n = self.n_offsets();
        &self.data[angle_index * n..(angle_index + 1) * n]
    }

    pub fn coverage_column(&self, angle_index: usize) -> &[f64] {
        let n = self.n_offsets();
        &self.coverage[angle_index * n..(angle_index + 1) * n]
    }

    /// Index of the grid angle nearest to `deg`, modulo 180.
    pub fn angle_index(&self, deg: f64) -> Option<usize> {
        let dist = |a: f64| {
            let d = (a - deg).rem_euclid(180.0);
            d.min(180.0 - d)
        };
        (0..self.n_angles()).min_by(|&i, &j| dist(self.angles[i]).total_cmp(&dist(self.angles[j])))
    }

    /// Offset index nearest the image centre.
    pub fn centre_index(&self) -> usize {
        (self.n_offsets() - 1) / 2
    }
}

/// Sub-pixels per pixel along each axis. Splitting pixels keeps a line
/// sharp at angles where whole pixels would straddle two bins unevenly.
const SUPERSAMPLE: usize = 2;

/// `[0, 180)` in steps of `step_deg`.
pub fn default_angles(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..n).map(|i| i as f64 * step_deg).collect()
}

/// Line integrals of `img` at each angle (degrees).
pub fn radon(img: &Field, angles: &[f64]) -> Sinogram {
    radon_sampled(img, angles, SUPERSAMPLE)
}

/// [`radon`] without pixel splitting: a quarter of the work, for comparing
/// angles.
pub fn radon_preview(img: &Field, angles: &[f64]) -> Sinogram {
    radon_sampled(img, angles, 1)
}

/// Pixel-driven projection: each sub-pixel lands at its signed distance
/// along the normal and is shared linearly between the two nearest bins.
/// The weights of every sub-pixel sum to one, so each column holds the
/// image mass up to rounding.
fn radon_sampled(img: &Field, angles: &[f64], supersample: usize) -> Sinogram {
    let (w, h) = (img.width, img.height);
    let diag = ((w * w + h * h) as f64).sqrt();
    let half = (diag / 2.0).ceil() as isize + 1;
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    // Aligns the 0-degree bins with pixel columns.
    let shift = cx - cx.floor();
    let offsets: Vec<f64> = (-half..=half).map(|k| k as f64 + shift).collect();
    let first = offsets[0];
    let k = supersample as f64;
    let subs: Vec<f64> = (0..supersample).map(|i| (i as f64 + 0.5) / k - 0.5).collect();
    let wgt = 1.0 / (k * k);

    let columns: Vec<(Vec<f64>, Vec<f64>)> = angles
        .par_iter()
        .map(|&deg| {
            let (sin, cos) = deg.to_radians().sin_cos();
            // Sub-pixel displacements along the normal, shared by all pixels.
            let steps: Vec<f64> = subs.iter().flat_map(|&sy| subs.iter().map(move |&sx| sx * cos + sy * sin)).collect();
            let mut col = vec![0.0; offsets.len()];
            let mut cov = vec![0.0; offsets.len()];
            for y in 0..h {
                let row = &img.data[y * w..(y + 1) * w];
                let base_y = (y as f64 - cy) * sin - first;
                for (x, &v) in row.iter().enumerate() {
                    let base = (x as f64 - cx) * cos + base_y;
                    let v = v * wgt;
                    for &d in &steps {
                        // Positions stay above zero: bins reach past half the diagonal.
                        let s = base + d;
                        let i = s as usize;
                        let f = s - i as f64;
                        col[i] += v * (1.0 - f);
                        col[i + 1] += v * f;
                        cov[i] += wgt * (1.0 - f);
                        cov[i + 1] += wgt * f;
                    }
                }
            }
            (col, cov)
        })
        .collect();

    let mut data = Vec::with_capacity(angles.len() * offsets.len());
    let mut coverage = Vec::with_capacity(angles.len() * offsets.len());
    for (col, cov) in columns {
        data.extend(col);
        coverage.extend(cov);
    }
    Sinogram {
        angles: angles.to_vec(),
        offsets,
        data,
        coverage,
    }
}

/// Best-to-average score ratio below which an angle estimate is flagged.
pub const LOW_CONFIDENCE_RATIO: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub angle_deg: f64,
    pub index: usize,
    /// Per-angle line-response scores.
    pub scores: Vec<f64>,
    /// Best score over the mean score.
    pub confidence: f64,
    pub low_confidence: bool,
}

/// Variance of the chord-normalised ray means over rays covering at least
/// half the longest chord. Lines parallel to the rays make the ray means
/// alternate between line and gap; at other angles they average out.
fn line_score(col: &[f64], cov: &[f64]) -> (f64, f64) {
    let longest = cov.iter().cloned().fold(0.0, f64::max);
    if longest <= 0.0 {
        return (0.0, 0.0);
    }
    let means: Vec<f64> = col
        .iter()
        .zip(cov)
        .filter(|(_, &c)| c >= 0.5 * longest)
        .map(|(v, c)| v / c)
        .collect();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
    let power = means.iter().map(|m| m * m).sum::<f64>() / n;
    (var, power)
}

/// Angle whose rays best separate line from background.
///
/// Ties (within relative `1e-9`) go to the angle nearest 0, 90 or 180
/// degrees. A flat sinogram, where no angle stands out, is flagged
/// `low_confidence` and reports the tie-broken angle.
pub fn dominant_angle(sino: &Sinogram) -> AngleEstimate {
    assert!(sino.n_angles() > 0, "empty sinogram");
    let (scores, powers): (Vec<f64>, Vec<f64>) = (0..sino.n_angles())
        .map(|a| line_score(sino.column(a), sino.coverage_column(a)))
        .unzip();
    let best = scores.iter().cloned().fold(0.0, f64::max);
    let axis_distance = |deg: f64| {
        let d = deg.rem_euclid(90.0);
        d.min(90.0 - d)
    };
    let power = powers.iter().cloned().fold(0.0, f64::max);
    let flat = best <= 1e-12 * power || best == 0.0;
    let index = (0..scores.len())
        .filter(|&i| flat || scores[i] >= best * (1.0 - 1e-9))
        .min_by(|&i, &j| axis_distance(sino.angles[i]).total_cmp(&axis_distance(sino.angles[j])))
        .unwrap_or(0);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let confidence = if mean > 0.0 { best / mean } else { 1.0 };
    AngleEstimate {
        angle_deg: sino.angles[index],
        index,
        scores,
        confidence,
        low_confidence: flat || confidence < LOW_CONFIDENCE_RATIO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax(v: &[f64]) -> usize {
        v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    #[test]
    fn centred_vertical_line_peaks_at_zero() {
        let img = Field::from_fn(33, 33, |x, _| if x == 16 { 1.0 } else { 0.0 });
        let sino = radon(&img, &default_angles(0.5));
        let col = sino.column(0);
        assert_eq!(sino.offsets[argmax(col)], 0.0);
        assert!((col.iter().sum::<f64>() - 33.0).abs() < 1e-9);
        let est = dominant_angle(&sino);
        assert_eq!(est.angle_deg, 0.0);
        assert!(!est.low_confidence);
    }

    #[test]
    fn horizontal_line_responds_at_ninety() {
        let img = Field::from_fn(32, 32, |_, y| if y == 20 { 1.0 } else { 0.0 });
        let sino = radon(&img, &default_angles(1.0));
        let est = dominant_angle(&sino);
        assert_eq!(est.angle_deg, 90.0);
        // y = 20 lies 4.5 px below the centre row 15.5.
        let col = sino.column(est.index);
        assert_eq!(sino.offsets[argmax(col)], 4.5);
    }

    #[test]
    fn centred_point_is_rotation_invariant() {
        let img = Field::from_fn(31, 31, |x, y| if x == 15 && y == 15 { 1.0 } else { 0.0 });
        let sino = radon(&img, &[0.0, 30.0, 45.0, 90.0, 135.0]);
        for a in 0..sino.n_angles() {
            let col = sino.column(a);
            assert_eq!(sino.offsets[argmax(col)], 0.0);
        }
    }

    #[test]
    fn columns_preserve_mass() {
        let img = Field::from_fn(40, 28, |x, y| 0.5 + 0.3 * ((x as f64 * 0.3).sin() * (y as f64 * 0.2).cos()));
        let total = img.sum();
        let sino = radon(&img, &default_angles(7.5));
        for a in 0..sino.n_angles() {
            let s: f64 = sino.column(a).iter().sum();
            assert!((s - total).abs() / total < 1e-3, "{}: {s} vs {total}", sino.angles[a]);
        }
    }

    #[test]
    fn constant_image_is_low_confidence() {
        let img = Field::from_fn(24, 24, |_, _| 0.6);
        let est = dominant_angle(&radon(&img, &default_angles(0.5)));
        assert!(est.low_confidence);
        assert_eq!(est.angle_deg, 0.0);
    }

    #[test]
    fn angle_lookup_wraps() {
        let sino = radon(&Field::zeros(4, 4), &default_angles(0.5));
        assert_eq!(sino.angle_index(179.9), Some(0));
        assert_eq!(sino.angle_index(2.1), Some(4));
    }
}
