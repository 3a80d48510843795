//! Writing a decomposition as band images plus a JSON manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decompose::{SpectralDecomposition, SpectrumSample};
use super::flow::{FlowDiagnostics, TvFlowConfig};
use super::ops::TvVariant;
use crate::error::Result;
use crate::image::Field;
use crate::imageio::{encode_pgm, encode_png_gray, normalize_for_display, DisplayMapping};

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandFile {
    pub name: String,
    /// `[t_lo, t_hi)`; the residual has `t_hi == null`.
    pub t_lo: f64,
    pub t_hi: Option<f64>,
    pub png: String,
    pub pgm: String,
    pub mapping: DisplayMapping,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionManifest {
    pub schema: u32,
    pub width: usize,
    pub height: usize,
    pub band_edges: Vec<f64>,
    pub dt: f64,
    pub t_max: f64,
    pub variant: TvVariant,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub mean: f64,
    pub diagnostics: FlowDiagnostics,
    pub warnings: Vec<String>,
    pub bands: Vec<BandFile>,
    pub residual: BandFile,
    pub spectrum: Vec<SpectrumSample>,
    /// Max-norm reconstruction error, present when verification was requested.
    pub verification_error: Option<f64>,
}

/// Encoded artefact ready to be written or served.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn band_file(name: &str, field: &Field, t_lo: f64, t_hi: Option<f64>, out: &mut Vec<Artifact>) -> Result<BandFile> {
    let (img, mapping) = normalize_for_display(field);
    let png = format!("{name}.png");
    let pgm = format!("{name}.pgm");
    out.push(Artifact {
        name: png.clone(),
        bytes: encode_png_gray(&img)?,
    });
    out.push(Artifact {
        name: pgm.clone(),
        bytes: encode_pgm(&img),
    });
    Ok(BandFile {
        name: name.to_string(),
        t_lo,
        t_hi,
        png,
        pgm,
        mapping,
        energy: field.energy(),
    })
}

/// Builds the manifest and the encoded band images.
pub fn render_decomposition(
    d: &SpectralDecomposition,
    cfg: &TvFlowConfig,
    original: Option<&Field>,
) -> Result<(DecompositionManifest, Vec<Artifact>)> {
    let mut artifacts = Vec::new();
    let mut bands = Vec::new();
    let mut lower = 0.0;
    for (k, (band, &edge)) in d.bands.iter().zip(&d.band_edges).enumerate() {
        bands.push(band_file(&format!("band_{k:02}"), band, lower, Some(edge), &mut artifacts)?);
        lower = edge;
    }
    let residual = band_file("residual", &d.residual, lower, None, &mut artifacts)?;
    let mut warnings = Vec::new();
    if !d.diagnostics.converged() {
        warnings.push(format!(
            "inner solver hit the iteration cap on {} of {} steps",
            d.diagnostics.nonconverged_steps.len(),
            d.diagnostics.steps
        ));
    }
    let verification_error = original.map(|f| d.reconstruct().max_abs_diff(f));
    let manifest = DecompositionManifest {
        schema: MANIFEST_SCHEMA,
        width: d.residual.width,
        height: d.residual.height,
        band_edges: d.band_edges.clone(),
        dt: d.dt,
        t_max: cfg.t_max,
        variant: d.variant,
        inner_tol: cfg.inner_tol,
        inner_max_iter: cfg.inner_max_iter,
        mean: d.mean,
        diagnostics: d.diagnostics.clone(),
        warnings,
        bands,
        residual,
        spectrum: d.spectrum.clone(),
        verification_error,
    };
    Ok((manifest, artifacts))
}

pub fn write_decomposition(
    dir: &Path,
    d: &SpectralDecomposition,
    cfg: &TvFlowConfig,
    original: Option<&Field>,
) -> Result<DecompositionManifest> {
    std::fs::create_dir_all(dir)?;
    let (manifest, artifacts) = render_decomposition(d, cfg, original)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), a.bytes)?;
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}
