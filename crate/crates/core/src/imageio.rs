//! Reading PNG / JPEG / PGM / PPM and writing PGM / PNG.
//!
//! Intensities are normalised to `[0, 1]` on load by the maximum value of
//! the source bit depth. Physical scale is never read from or written to
//! image headers.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::{to_grayscale, Field, GrayImage, RgbImage};

fn decode_dynamic(bytes: &[u8]) -> Result<DynamicImage> {
    let format = image::guess_format(bytes).map_err(|_| Error::UnsupportedFormat)?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Pnm) {
        return Err(Error::UnsupportedFormat);
    }
    image::load_from_memory_with_format(bytes, format).map_err(|e| Error::InvalidImage(e.to_string()))
}

fn is_sixteen_bit(img: &DynamicImage) -> bool {
    use image::ColorType::*;
    matches!(img.color(), L16 | La16 | Rgb16 | Rgba16)
}

fn dynamic_to_rgb(img: &DynamicImage) -> Result<RgbImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if is_sixteen_bit(img) {
        img.to_rgb16()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 65535.0))
            .collect()
    } else {
        img.to_rgb8()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect()
    };
    RgbImage::new(w, h, data)
}

fn dynamic_to_gray(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => GrayImage::new(w, h, g.pixels().map(|p| p.0[0] as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(g) => {
            GrayImage::new(w, h, g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect())
        }
        _ => Ok(to_grayscale(&dynamic_to_rgb(img)?)),
    }
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    dynamic_to_gray(&decode_dynamic(bytes)?)
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage> {
    dynamic_to_rgb(&decode_dynamic(bytes)?)
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_gray(&std::fs::read(path)?)
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_rgb(&std::fs::read(path)?)
}

/// Image dimensions without a full decode.
pub fn probe_dimensions(bytes: &[u8]) -> Result<(usize, usize)> {
    let img = decode_dynamic(bytes)?;
    Ok((img.width() as usize, img.height() as usize))
}

#[inline]
fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PGM (`P5`, maxval 255).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| to_u8(v)));
    out
}

pub fn encode_png_gray(img: &GrayImage) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.data().iter().map(|&v| to_u8(v)).collect(),
    )
    .ok_or_else(|| Error::InvalidImage("buffer size mismatch".into()))?;
    let mut out = Vec::new();
    buf.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| Error::InvalidImage(e.to_string()))?;
    Ok(out)
}

/// 16-bit greyscale PNG; keeps contrasts far below one 8-bit level.
pub fn encode_png_gray16(img: &GrayImage) -> Result<Vec<u8>> {
    let raw: Vec<u16> = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(img.width() as u32, img.height() as u32, raw)
        .ok_or_else(|| Error::InvalidImage("buffer size mismatch".into()))?;
    let mut out = Vec::new();
    buf.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| Error::InvalidImage(e.to_string()))?;
    Ok(out)
}

pub fn encode_png_rgb(img: &RgbImage) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img.data.iter().flat_map(|px| px.map(to_u8)).collect();
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, raw)
        .ok_or_else(|| Error::InvalidImage("buffer size mismatch".into()))?;
    let mut out = Vec::new();
    buf.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| Error::InvalidImage(e.to_string()))?;
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}

pub fn write_png(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_png_gray(img)?)?;
    Ok(())
}

pub fn write_png16(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_png_gray16(img)?)?;
    Ok(())
}

pub fn write_png_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_png_rgb(img)?)?;
    Ok(())
}

/// Linear map of a signed field onto `[0, 1]` for display; `value =
/// offset + scale * intensity` recovers the field.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisplayMapping {
    pub offset: f64,
    pub scale: f64,
}

pub fn normalize_for_display(field: &Field) -> (GrayImage, DisplayMapping) {
    let (lo, hi) = field.min_max();
    let span = hi - lo;
    let data = if span > 0.0 {
        field.data.iter().map(|v| (v - lo) / span).collect()
    } else {
        vec![0.5; field.len()]
    };
    let img = GrayImage::from_clamped(field.width, field.height, data).expect("field dimensions are valid");
    let scale = if span > 0.0 { span } else { 0.0 };
    let offset = if span > 0.0 { lo } else { lo - 0.5 * scale };
    (img, DisplayMapping { offset, scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_payload() {
        let img = GrayImage::new(3, 2, vec![0.0, 0.5, 1.0, 1.0, 0.2, 0.0]).unwrap();
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&bytes[11..], &[0, 128, 255, 255, 51, 0]);
        let back = decode_gray(&bytes).unwrap();
        assert_eq!((back.width(), back.height()), (3, 2));
        assert_eq!(back.get(2, 0), 1.0);
    }

    #[test]
    fn png_round_trip_is_exact_on_8bit_values() {
        let img = GrayImage::new(4, 1, vec![0.0, 51.0 / 255.0, 204.0 / 255.0, 1.0]).unwrap();
        let back = decode_gray(&encode_png_gray(&img).unwrap()).unwrap();
        assert_eq!(back.data(), img.data());
    }

    #[test]
    fn sixteen_bit_normalised_by_max() {
        let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 1, vec![0u16, 65535]).unwrap();
        let mut bytes = Vec::new();
        DynamicImage::ImageLuma16(buf)
            .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
            .unwrap();
        let img = decode_gray(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn png16_keeps_faint_contrast() {
        let img = GrayImage::new(3, 1, vec![0.6, 0.61, 0.6 + 1e-4]).unwrap();
        let back = decode_gray(&encode_png_gray16(&img).unwrap()).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }

    #[test]
    fn text_is_unsupported() {
        assert!(matches!(decode_gray(b"hello, world"), Err(Error::UnsupportedFormat)));
    }
}
