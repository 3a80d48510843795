//! Image carriers: intensity images in `[0, 1]`, RGB input images, signed
//! real fields (flow frames, bands, filter output) and edge masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned pixel rectangle, used for patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    /// Intersection, or `None` when empty.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = (self.x0 + self.w).min(other.x0 + other.w);
        let y1 = (self.y0 + self.h).min(other.y0 + other.h);
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    fn check_inside(&self, width: usize, height: usize) -> Result<()> {
        let fits = self.w > 0
            && self.h > 0
            && self.x0.checked_add(self.w).is_some_and(|x1| x1 <= width)
            && self.y0.checked_add(self.h).is_some_and(|y1| y1 <= height);
        if fits {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x0: self.x0,
                y0: self.y0,
                w: self.w,
                h: self.h,
                width,
                height,
            })
        }
    }
}

/// Row-major real-valued field without range restrictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn add_assign(&mut self, other: &Field) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn crop(&self, rect: Rect) -> Result<Field> {
        rect.check_inside(self.width, self.height)?;
        let mut data = Vec::with_capacity(rect.w * rect.h);
        for y in rect.y0..rect.y0 + rect.h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + rect.x0..row + rect.x0 + rect.w]);
        }
        Ok(Field {
            width: rect.w,
            height: rect.h,
            data,
        })
    }
}

/// Grayscale intensity image with values in `[0, 1]` and an optional
/// physical scale in pixels per millimetre.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    scale: Option<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("empty image".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
            scale: None,
        })
    }

    /// Builds an image from arbitrary values, clamping into `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn with_scale(mut self, pixels_per_mm: f64) -> Result<Self> {
        if !(pixels_per_mm.is_finite() && pixels_per_mm > 0.0) {
            return Err(Error::InvalidImage(format!(
                "scale must be positive and finite, got {pixels_per_mm}"
            )));
        }
        self.scale = Some(pixels_per_mm);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn to_field(&self) -> Field {
        Field {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }

    /// Converts a field back into an image, clamping into `[0, 1]`.
    pub fn from_field(field: &Field) -> Result<Self> {
        Self::from_clamped(field.width, field.height, field.data.clone())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Multiplies every intensity by `s` (clamping), keeping the scale.
    pub fn scaled_intensity(&self, s: f64) -> Result<Self> {
        let mut out = Self::from_clamped(
            self.width,
            self.height,
            self.data.iter().map(|v| v * s).collect(),
        )?;
        out.scale = self.scale;
        Ok(out)
    }
}

/// Row-major RGB image, channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
    pub scale: Option<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            scale: None,
        })
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| [v, v, v]).collect(),
            scale: img.scale,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        self.data[y * self.width + x] = rgb;
    }
}

/// Boolean edge map with the dimensions of its source image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl EdgeMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&e| e).count()
    }
}

/// Rec. 709 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .iter()
        .map(|&[r, g, b]| {
            // An equal-channel pixel must map back to exactly that value.
            if r == g && g == b {
                r.clamp(0.0, 1.0)
            } else {
                (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b).clamp(0.0, 1.0)
            }
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
        scale: img.scale.filter(|s| s.is_finite() && *s > 0.0),
    }
}

pub fn crop_patch(img: &GrayImage, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
    let rect = Rect::new(x0, y0, w, h);
    rect.check_inside(img.width, img.height)?;
    let mut data = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        let row = y * img.width;
        data.extend_from_slice(&img.data[row + x0..row + x0 + w]);
    }
    Ok(GrayImage {
        width: w,
        height: h,
        data,
        scale: img.scale,
    })
}
