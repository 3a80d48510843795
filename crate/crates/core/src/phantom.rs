//! Synthetic images with known ground truth.
//!
//! Pixel `(x, y)` has its centre at `(x, y)`. Line-like elements (line sets,
//! folds) use the angle convention of the Radon transform: angle `a` has
//! normal `(cos a, sin a)`, so 0 deg is a vertical line and 90 deg a
//! horizontal one, and a line's position is its normal offset `x cos a +
//! y sin a` from the image origin (the column for vertical lines, the row
//! for horizontal ones).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibrate::Axis;
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Pixels per millimetre.
    pub scale: f64,
    #[serde(default = "default_background")]
    pub background: f64,
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_background() -> f64 {
    0.5
}

fn default_line_width() -> f64 {
    3.0
}

fn default_vertices() -> usize {
    9
}

fn default_tick_width() -> usize {
    2
}

/// Composited in order; every contrast is added to the running image
/// except ink, which darkens by its contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    /// Hard-edged disk: pixels whose centre lies within `r`.
    Disk { cx: f64, cy: f64, r: f64, contrast: f64 },
    /// Hard-edged rectangle covering columns `x0..x0+w`, rows `y0..y0+h`.
    Rect {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        contrast: f64,
    },
    /// Parallel lines with half-pixel soft edges. Exactly one of
    /// `positions`, `period_px`, `density_per_cm` places them; the periodic
    /// forms start at `phase_px`.
    LineSet {
        #[serde(default)]
        angle_deg: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        positions: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period_px: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density_per_cm: Option<f64>,
        #[serde(default)]
        phase_px: f64,
        #[serde(default = "default_line_width")]
        width_px: f64,
        contrast: f64,
    },
    /// Star-shaped random polygon around `(cx, cy)` with radii in
    /// `[0.6, 1] * radius`.
    InkBlob {
        cx: f64,
        cy: f64,
        radius: f64,
        contrast: f64,
        #[serde(default = "default_vertices")]
        vertices: usize,
    },
    /// A straight crease band; through the canvas centre unless
    /// `offset_px` is given.
    Fold {
        angle_deg: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset_px: Option<f64>,
        width_px: f64,
        contrast: f64,
    },
    /// Ruler strokes `width_px` wide every `spacing_px`, starting at
    /// `first_px` and spanning `from_px..to_px` across the axis.
    RulerTicks {
        axis: Axis,
        spacing_px: f64,
        #[serde(default)]
        first_px: f64,
        from_px: usize,
        to_px: usize,
        #[serde(default = "default_tick_width")]
        width_px: usize,
        contrast: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Normal offsets of every line crossing the canvas, ascending.
    pub line_positions_px: Vec<f64>,
    pub line_angle_deg: Option<f64>,
    pub density_per_cm: Option<f64>,
    /// `contrast * r / 2` per disk, in spec order.
    pub disk_scales: Vec<f64>,
    /// Tick stroke centres along the ruler axis.
    pub tick_columns: Vec<f64>,
}

impl PhantomSpec {
    pub fn blank(width: usize, height: usize, scale: f64) -> Self {
        Self {
            width,
            height,
            scale,
            background: default_background(),
            elements: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn with(mut self, element: Element) -> Self {
        self.elements.push(element);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("canvas {}x{} is empty", self.width, self.height));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return bad(format!("background {} outside [0, 1]", self.background));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        let inside = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0;
        for (i, e) in self.elements.iter().enumerate() {
            let fail = |what: &str| Err(Error::InvalidSpec(format!("element {i}: {what}")));
            match e {
                Element::Disk { cx, cy, r, contrast } => {
                    if !(*r > 0.0) || !contrast.is_finite() {
                        return fail("disk needs a positive radius and finite contrast");
                    }
                    if !inside(*cx, *cy) {
                        return fail("disk centre outside the canvas");
                    }
                }
                Element::Rect { x0, y0, w: rw, h: rh, .. } => {
                    if *rw == 0 || *rh == 0 || x0 + rw > self.width || y0 + rh > self.height {
                        return fail("rectangle empty or outside the canvas");
                    }
                }
                Element::LineSet { width_px, contrast, .. } => {
                    if !(*width_px > 0.0) || !contrast.is_finite() {
                        return fail("line set needs a positive width and finite contrast");
                    }
                    let (angle, all) = self.line_positions(e)?;
                    let (lo, hi) = self.offset_range(angle);
                    let explicit = matches!(e, Element::LineSet { positions, .. } if !positions.is_empty());
                    if explicit && all.iter().any(|p| *p < lo || *p > hi) {
                        return fail("line position outside the canvas");
                    }
                    if !all.iter().any(|p| (lo..=hi).contains(p)) {
                        return fail("no line crosses the canvas");
                    }
                }
                Element::InkBlob { cx, cy, radius, vertices, .. } => {
                    if !(*radius > 0.0) || *vertices < 3 {
                        return fail("ink blob needs a positive radius and at least 3 vertices");
                    }
                    if !inside(*cx, *cy) {
                        return fail("ink blob centre outside the canvas");
                    }
                }
                Element::Fold { angle_deg, offset_px, width_px, .. } => {
                    if !(*width_px > 0.0) {
                        return fail("fold needs a positive width");
                    }
                    if let Some(off) = offset_px {
                        let (lo, hi) = self.offset_range(*angle_deg);
                        if *off < lo || *off > hi {
                            return fail("fold does not cross the canvas");
                        }
                    }
                }
                Element::RulerTicks {
                    axis,
                    spacing_px,
                    first_px,
                    from_px,
                    to_px,
                    width_px,
                    ..
                } => {
                    let (along, across) = match axis {
                        Axis::Horizontal => (self.width, self.height),
                        Axis::Vertical => (self.height, self.width),
                    };
                    if !(*spacing_px >= 1.0) || *width_px == 0 {
                        return fail("ruler needs spacing of at least 1 px and a positive tick width");
                    }
                    if from_px >= to_px || *to_px > across {
                        return fail("ruler band outside the canvas");
                    }
                    if !(*first_px >= 0.0) || first_px.round() as usize + width_px > along {
                        return fail("first tick outside the canvas");
                    }
                }
            }
        }
        Ok(())
    }

    /// Range of normal offsets `x cos a + y sin a` over the pixel centres.
    fn offset_range(&self, angle_deg: f64) -> (f64, f64) {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let (xm, ym) = ((self.width - 1) as f64, (self.height - 1) as f64);
        let corners = [0.0, xm * c, ym * s, xm * c + ym * s];
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn line_period(&self, period_px: Option<f64>, density_per_cm: Option<f64>) -> Option<f64> {
        period_px.or(density_per_cm.map(|d| 10.0 * self.scale / d))
    }

    /// Angle and every line offset of a line set, including lines just off
    /// the canvas whose soft edge may still reach it.
    fn line_positions(&self, e: &Element) -> Result<(f64, Vec<f64>)> {
        let Element::LineSet {
            angle_deg,
            positions,
            period_px,
            density_per_cm,
            phase_px,
            width_px,
            ..
        } = e
        else {
            unreachable!("line_positions called on a non-line element");
        };
        let given = usize::from(!positions.is_empty()) + usize::from(period_px.is_some()) + usize::from(density_per_cm.is_some());
        if given != 1 {
            return Err(Error::InvalidSpec(
                "line set needs exactly one of positions, period_px, density_per_cm".into(),
            ));
        }
        if !positions.is_empty() {
            let mut p = positions.clone();
            p.sort_by(f64::total_cmp);
            return Ok((*angle_deg, p));
        }
        let period = self.line_period(*period_px, *density_per_cm).unwrap_or(0.0);
        if !(period.is_finite() && period >= 1.0) {
            return Err(Error::InvalidSpec(format!("line period must be at least 1 px, got {period}")));
        }
        let (lo, hi) = self.offset_range(*angle_deg);
        let margin = width_px + 1.0;
        let k0 = ((lo - margin - phase_px) / period).floor() as i64;
        let k1 = ((hi + margin - phase_px) / period).ceil() as i64;
        Ok((*angle_deg, (k0..=k1).map(|k| phase_px + k as f64 * period).collect()))
    }
}

/// Coverage of a soft band of half-width `half` at normal distance `d`.
fn soft(d: f64, half: f64) -> f64 {
    (half + 0.5 - d.abs()).clamp(0.0, 1.0)
}

fn add_band(acc: &mut [f64], w: usize, angle_deg: f64, offsets: &[f64], width: f64, contrast: f64) {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let half = width / 2.0;
    for (i, v) in acc.iter_mut().enumerate() {
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let n = x * c + y * s;
        // Bands never overlap for sane periods; take the nearest one.
        let cover = offsets.iter().map(|o| soft(n - o, half)).fold(0.0, f64::max);
        *v += contrast * cover;
    }
}

fn point_in_polygon(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn blob_polygon(cx: f64, cy: f64, radius: f64, vertices: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let step = std::f64::consts::TAU / vertices as f64;
    (0..vertices)
        .map(|k| {
            let a = (k as f64 + rng.random_range(-0.3..0.3)) * step;
            let r = radius * rng.random_range(0.6..1.0);
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

/// Renders `spec`. Elements are added in order and the sum is clamped to
/// `[0, 1]`; noise is added last and clamped again.
pub fn generate(spec: &PhantomSpec) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut acc = vec![spec.background; w * h];
    let mut truth = GroundTruth::default();

    for (idx, e) in spec.elements.iter().enumerate() {
        match e {
            Element::Disk { cx, cy, r, contrast } => {
                for (i, v) in acc.iter_mut().enumerate() {
                    let (x, y) = ((i % w) as f64, (i / w) as f64);
                    if (x - cx).hypot(y - cy) <= *r {
                        *v += contrast;
                    }
                }
                truth.disk_scales.push(contrast * r / 2.0);
            }
            Element::Rect { x0, y0, w: rw, h: rh, contrast } => {
                for y in *y0..y0 + rh {
                    for v in &mut acc[y * w + x0..y * w + x0 + rw] {
                        *v += contrast;
                    }
                }
            }
            Element::LineSet {
                width_px,
                contrast,
                period_px,
                density_per_cm,
                ..
            } => {
                let (angle, offsets) = spec.line_positions(e)?;
                add_band(&mut acc, w, angle, &offsets, *width_px, *contrast);
                let (lo, hi) = spec.offset_range(angle);
                truth
                    .line_positions_px
                    .extend(offsets.iter().copied().filter(|p| (lo..=hi).contains(p)));
                truth.line_angle_deg = Some(angle);
                if let Some(period) = spec.line_period(*period_px, *density_per_cm) {
                    truth.density_per_cm = Some(10.0 * spec.scale / period);
                }
            }
            Element::InkBlob {
                cx,
                cy,
                radius,
                contrast,
                vertices,
            } => {
                // Stream 0 is reserved for the noise.
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(idx as u64 + 1);
                let poly = blob_polygon(*cx, *cy, *radius, *vertices, &mut rng);
                for (i, v) in acc.iter_mut().enumerate() {
                    if point_in_polygon((i % w) as f64, (i / w) as f64, &poly) {
                        *v -= contrast;
                    }
                }
            }
            Element::Fold {
                angle_deg,
                offset_px,
                width_px,
                contrast,
            } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let centre = offset_px.unwrap_or(((w - 1) as f64 * c + (h - 1) as f64 * s) / 2.0);
                add_band(&mut acc, w, *angle_deg, &[centre], *width_px, *contrast);
            }
            Element::RulerTicks {
                axis,
                spacing_px,
                first_px,
                from_px,
                to_px,
                width_px,
                contrast,
            } => {
                let along = match axis {
                    Axis::Horizontal => w,
                    Axis::Vertical => h,
                };
                let mut k = 0;
                loop {
                    let start = (first_px + k as f64 * spacing_px).round() as usize;
                    if start + width_px > along {
                        break;
                    }
                    for a in start..start + width_px {
                        for b in *from_px..*to_px {
                            let i = match axis {
                                Axis::Horizontal => b * w + a,
                                Axis::Vertical => a * w + b,
                            };
                            acc[i] += contrast;
                        }
                    }
                    truth.tick_columns.push(start as f64 + (*width_px - 1) as f64 / 2.0);
                    k += 1;
                }
            }
        }
    }
    truth.line_positions_px.sort_by(f64::total_cmp);

    for v in acc.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        for v in acc.iter_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    let img = GrayImage::new(w, h, acc)?.with_scale(spec.scale)?;
    Ok((img, truth))
}

pub const PRESET_NAMES: &[&str] = &[
    "chain-basic",
    "chain-wide-gap",
    "chain-blank",
    "laid-basic",
    "laid-fold",
    "laid-degraded",
    "disks4",
    "rects",
    "ruler",
    "page",
];

fn chain_lines(positions: &[f64]) -> Element {
    Element::LineSet {
        angle_deg: 0.0,
        positions: positions.to_vec(),
        period_px: None,
        density_per_cm: None,
        phase_px: 0.0,
        width_px: 6.0,
        contrast: 0.02,
    }
}

fn ink(cx: f64, cy: f64, radius: f64) -> Element {
    Element::InkBlob {
        cx,
        cy,
        radius,
        contrast: 0.5,
        vertices: 9,
    }
}

fn laid_grating() -> Element {
    Element::LineSet {
        angle_deg: 2.0,
        positions: Vec::new(),
        period_px: None,
        density_per_cm: Some(8.0),
        phase_px: 3.0,
        width_px: 5.0,
        contrast: 0.02,
    }
}

/// Named phantoms used by the tests and the command line.
pub fn preset(name: &str) -> Option<PhantomSpec> {
    let spec = match name {
        // Three chain lines 10 mm apart under ink, at 10 px/mm.
        "chain-basic" => PhantomSpec {
            background: 0.6,
            noise_sigma: 0.005,
            seed: 7,
            ..PhantomSpec::blank(300, 128, 10.0)
        }
        .with(chain_lines(&[50.0, 150.0, 250.0]))
        .with(ink(100.0, 40.0, 22.0))
        .with(ink(205.0, 80.0, 24.0))
        .with(ink(150.0, 110.0, 16.0)),
        // Gaps of 20 mm and 60 mm at 5 px/mm; the second is implausible.
        "chain-wide-gap" => PhantomSpec {
            background: 0.6,
            noise_sigma: 0.005,
            seed: 11,
            ..PhantomSpec::blank(480, 120, 5.0)
        }
        .with(chain_lines(&[40.0, 140.0, 440.0])),
        "chain-blank" => PhantomSpec {
            background: 0.6,
            noise_sigma: 0.005,
            seed: 13,
            ..PhantomSpec::blank(300, 128, 10.0)
        },
        // 8 lines per cm at 12 px/mm, tilted 2 deg from vertical.
        "laid-basic" => PhantomSpec {
            background: 0.6,
            noise_sigma: 0.005,
            seed: 17,
            ..PhantomSpec::blank(160, 160, 12.0)
        }
        .with(laid_grating()),
        "laid-fold" => preset("laid-basic")?.with(Element::Fold {
            angle_deg: 35.0,
            offset_px: None,
            width_px: 14.0,
            contrast: 0.3,
        }),
        "laid-degraded" => PhantomSpec {
            noise_sigma: 0.02,
            seed: 19,
            ..preset("laid-basic")?
        },
        // Eigen-scales 0.5, 1.2, 2.4 and 4.0.
        "disks4" => PhantomSpec {
            background: 0.1,
            ..PhantomSpec::blank(128, 128, 1.0)
        }
        .with(Element::Disk { cx: 32.0, cy: 32.0, r: 5.0, contrast: 0.2 })
        .with(Element::Disk { cx: 95.0, cy: 32.0, r: 8.0, contrast: 0.3 })
        .with(Element::Disk { cx: 32.0, cy: 95.0, r: 12.0, contrast: 0.4 })
        .with(Element::Disk { cx: 95.0, cy: 95.0, r: 16.0, contrast: 0.5 }),
        "rects" => PhantomSpec {
            background: 0.2,
            ..PhantomSpec::blank(64, 64, 1.0)
        }
        .with(Element::Rect { x0: 16, y0: 20, w: 32, h: 24, contrast: 0.5 }),
        // 1 mm ticks every 20 px.
        "ruler" => PhantomSpec {
            background: 0.9,
            noise_sigma: 0.01,
            seed: 23,
            ..PhantomSpec::blank(400, 80, 20.0)
        }
        .with(Element::RulerTicks {
            axis: Axis::Horizontal,
            spacing_px: 20.0,
            first_px: 10.0,
            from_px: 20,
            to_px: 60,
            width_px: 2,
            contrast: -0.6,
        }),
        // A 300 mm page, 2000 px tall, on a dark backdrop.
        "page" => PhantomSpec {
            background: 0.1,
            noise_sigma: 0.01,
            seed: 29,
            ..PhantomSpec::blank(400, 2200, 2000.0 / 300.0)
        }
        .with(Element::Rect { x0: 40, y0: 100, w: 320, h: 2000, contrast: 0.7 }),
        _ => return None,
    };
    Some(spec)
}
