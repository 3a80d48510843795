//! Frequency-domain rectangular filtering, axis projection, Radon transform
//! and dominant-angle estimation.

use serde::{Deserialize, Serialize};

use crate::image::Field;

mod filter;
mod radon;

pub use filter::{fft2, ifft2_real, rect_fourier_filter, RectFilterSpec};
pub use radon::{default_angles, dominant_angle, radon, radon_preview, AngleEstimate, Sinogram, LOW_CONFIDENCE_RATIO};

/// Orientation of the lines being measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Lines run top to bottom; positions are columns.
    #[default]
    Vertical,
    /// Lines run left to right; positions are rows.
    Horizontal,
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Orientation::Vertical => "vertical",
            Orientation::Horizontal => "horizontal",
        })
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vertical" | "v" => Ok(Orientation::Vertical),
            "horizontal" | "h" => Ok(Orientation::Horizontal),
            other => Err(format!("unknown orientation `{other}`")),
        }
    }
}

/// Column sums for vertical lines, row sums for horizontal ones.
pub fn project(img: &Field, orientation: Orientation) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    match orientation {
        Orientation::Vertical => {
            let mut out = vec![0.0; w];
            for row in img.data.chunks_exact(w) {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
            out
        }
        Orientation::Horizontal => (0..h).map(|y| img.data[y * w..(y + 1) * w].iter().sum()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_of_ones() {
        let f = Field::from_fn(4, 4, |_, _| 1.0);
        assert_eq!(project(&f, Orientation::Vertical), vec![4.0; 4]);
        assert_eq!(project(&f, Orientation::Horizontal), vec![4.0; 4]);
    }

    #[test]
    fn bright_column_is_the_maximum() {
        let f = Field::from_fn(9, 5, |x, _| if x == 6 { 1.0 } else { 0.1 });
        let p = project(&f, Orientation::Vertical);
        let arg = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(arg, 6);
        let p = project(&f, Orientation::Horizontal);
        assert!(p.iter().all(|&v| (v - p[0]).abs() < 1e-12));
    }

    #[test]
    fn orientation_parses() {
        assert_eq!("Vertical".parse::<Orientation>().unwrap(), Orientation::Vertical);
        assert_eq!("h".parse::<Orientation>().unwrap(), Orientation::Horizontal);
        assert!("diagonal".parse::<Orientation>().is_err());
    }
}
