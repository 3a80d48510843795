use super::chain::ChainLineReport;
use super::laid::LaidLineReport;
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::transforms::Orientation;

pub const DETECTED_COLOUR: [f64; 3] = [1.0, 0.0, 0.0];
pub const OMITTED_COLOUR: [f64; 3] = [1.0, 0.85, 0.0];
pub const WINDOW_COLOUR: [f64; 3] = [0.0, 0.8, 1.0];

/// Legend strip height at the bottom-left corner.
const LEGEND_ROWS: usize = 4;
const SWATCH: usize = 12;
/// Dash pattern for omitted lines: on for `DASH_ON` of every `DASH` pixels.
const DASH: usize = 8;
const DASH_ON: usize = 5;

#[derive(Debug, Clone, Copy)]
pub enum OverlayReport<'a> {
    Chain(&'a ChainLineReport),
    Laid(&'a LaidLineReport),
}

fn draw_legend(img: &mut RgbImage, colours: &[[f64; 3]]) {
    let y0 = img.height.saturating_sub(LEGEND_ROWS);
    for (k, c) in colours.iter().enumerate() {
        for x in k * SWATCH..((k + 1) * SWATCH).min(img.width) {
            for y in y0..img.height {
                img.put(x, y, *c);
            }
        }
    }
}

/// Samples a line through `centre + s * n` along `(-sin a, cos a)`.
fn draw_oblique(img: &mut RgbImage, angle_deg: f64, s: f64, colour: [f64; 3]) {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let (cx, cy) = ((img.width - 1) as f64 / 2.0, (img.height - 1) as f64 / 2.0);
    let reach = (img.width as f64).hypot(img.height as f64);
    let steps = (2.0 * reach / 0.5) as i64;
    for k in 0..=steps {
        let v = -reach + k as f64 * 0.5;
        let x = (cx + s * cos - v * sin).round();
        let y = (cy + s * sin + v * cos).round();
        if x >= 0.0 && y >= 0.0 && (x as usize) < img.width && (y as usize) < img.height {
            img.put(x as usize, y as usize, colour);
        }
    }
}

fn chain_overlay(img: &mut RgbImage, r: &ChainLineReport) -> Result<()> {
    let extent = match r.orientation {
        Orientation::Vertical => img.width,
        Orientation::Horizontal => img.height,
    };
    for p in &r.positions_px {
        if !(*p >= 0.0 && p.round() < extent as f64) {
            return Err(Error::PositionOutOfBounds { position: *p });
        }
    }
    for (i, p) in r.positions_px.iter().enumerate() {
        let at = p.round() as usize;
        let omitted = r.omitted_indices.contains(&i);
        let length = match r.orientation {
            Orientation::Vertical => img.height,
            Orientation::Horizontal => img.width,
        };
        for t in 0..length {
            if omitted && t % DASH >= DASH_ON {
                continue;
            }
            let colour = if omitted { OMITTED_COLOUR } else { DETECTED_COLOUR };
            match r.orientation {
                Orientation::Vertical => img.put(at, t, colour),
                Orientation::Horizontal => img.put(t, at, colour),
            }
        }
    }
    draw_legend(img, &[DETECTED_COLOUR, OMITTED_COLOUR]);
    Ok(())
}

fn laid_overlay(img: &mut RgbImage, r: &LaidLineReport) -> Result<()> {
    let half = (img.width as f64).hypot(img.height as f64) / 2.0;
    for p in &r.positions_px {
        if !(p.abs() <= half) {
            return Err(Error::PositionOutOfBounds { position: *p });
        }
    }
    for p in &r.positions_px {
        draw_oblique(img, r.angle_deg, *p, DETECTED_COLOUR);
    }
    // The window runs along the cross-section through the patch centre.
    let (sin, cos) = r.angle_deg.to_radians().sin_cos();
    let (cx, cy) = ((img.width - 1) as f64 / 2.0, (img.height - 1) as f64 / 2.0);
    let steps = (r.window_length_px * 2.0).ceil() as usize;
    for k in 0..=steps {
        let s = r.window_anchor_px + r.window_length_px * k as f64 / steps as f64;
        for v in -1..=1 {
            let x = (cx + s * cos - v as f64 * sin).round();
            let y = (cy + s * sin + v as f64 * cos).round();
            if x >= 0.0 && y >= 0.0 && (x as usize) < img.width && (y as usize) < img.height {
                img.put(x as usize, y as usize, WINDOW_COLOUR);
            }
        }
    }
    draw_legend(img, &[DETECTED_COLOUR, WINDOW_COLOUR]);
    Ok(())
}

/// Draws a report onto a copy of `img`: detected lines at full length,
/// omitted chain lines dashed, the laid-line 1 cm window as a bar along the
/// cross-section, and a colour legend in the bottom-left corner.
pub fn render_overlay(img: &RgbImage, report: OverlayReport<'_>) -> Result<RgbImage> {
    let mut out = img.clone();
    match report {
        OverlayReport::Chain(r) => chain_overlay(&mut out, r)?,
        OverlayReport::Laid(r) => laid_overlay(&mut out, r)?,
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::Calibration;
    use crate::detect::{chain_report_from_stack, ChainParams};
    use crate::image::{GrayImage, Rect};
    use crate::spectral::tv_flow;

    fn chain(positions: &[f64]) -> ChainLineReport {
        let img = GrayImage::filled(24, 24, 0.5).unwrap();
        let params = ChainParams::default();
        let stack = tv_flow(&img, &params.flow).unwrap();
        let r = chain_report_from_stack(&stack, &params, Some(&Calibration::explicit(1.0).unwrap())).unwrap();
        let mut r = ChainLineReport {
            positions_px: positions.to_vec(),
            ..r
        };
        r.provenance.patch = Some(Rect::new(0, 0, 24, 24));
        r.with_omitted(&[]).unwrap()
    }

    fn base() -> RgbImage {
        RgbImage::from_gray(&GrayImage::filled(40, 30, 0.5).unwrap())
    }

    fn full_columns(img: &RgbImage, colour: [f64; 3]) -> Vec<usize> {
        (0..img.width)
            .filter(|&x| (0..img.height - LEGEND_ROWS).all(|y| img.get(x, y) == colour))
            .collect()
    }

    #[test]
    fn empty_report_only_adds_the_legend() {
        let img = base();
        let out = render_overlay(&img, OverlayReport::Chain(&chain(&[]))).unwrap();
        for y in 0..img.height - LEGEND_ROWS {
            for x in 0..img.width {
                assert_eq!(out.get(x, y), img.get(x, y));
            }
        }
        assert_eq!(out.get(0, img.height - 1), DETECTED_COLOUR);
    }

    #[test]
    fn three_lines_three_columns() {
        let out = render_overlay(&base(), OverlayReport::Chain(&chain(&[5.0, 17.0, 33.0]))).unwrap();
        assert_eq!(full_columns(&out, DETECTED_COLOUR), vec![5, 17, 33]);
    }

    #[test]
    fn omitted_lines_are_dashed() {
        let r = chain(&[5.0, 17.0, 33.0]).with_omitted(&[1]).unwrap();
        let out = render_overlay(&base(), OverlayReport::Chain(&r)).unwrap();
        assert_eq!(full_columns(&out, DETECTED_COLOUR), vec![5, 33]);
        assert_eq!(out.get(17, 0), OMITTED_COLOUR);
        assert_eq!(out.get(17, DASH_ON), [0.5; 3]);
    }

    #[test]
    fn out_of_bounds_position_is_an_error() {
        let err = render_overlay(&base(), OverlayReport::Chain(&chain(&[5.0, 45.0]))).unwrap_err();
        assert!(matches!(err, Error::PositionOutOfBounds { .. }));
    }
}
