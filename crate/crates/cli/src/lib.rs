//! Command-line front end: calibrate, decompose, detect chain and laid
//! lines, generate phantoms.
//!
//! [`run`] is the whole program short of exiting, so tests drive it
//! in-process. Exit codes: 0 ok, 2 usage or input error, 3 calibration
//! failure, 4 solver failure under `--strict` (or failed `--verify`), 5 no
//! lines found, 6 patch smaller than 1 cm.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mouldprint::detect::{
    detect_chain_lines, detect_laid_lines, render_overlay, OverlayReport, Threshold,
};
use mouldprint::image::crop_patch;
use mouldprint::imageio::{encode_pgm, encode_png_gray16, encode_png_rgb, load_gray};
use mouldprint::phantom::{generate, preset, PhantomSpec, PRESET_NAMES};
use mouldprint::spectral::{decompose, export::write_decomposition};
use mouldprint::{
    Axis, Calibration, CalibrationSource, Error, GrayImage, Orientation, Rect, RgbImage, TvVariant,
};
use serde::Serialize;

mod config;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CALIBRATION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_NO_LINES: i32 = 5;
pub const EXIT_PATCH_TOO_SMALL: i32 = 6;

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InsufficientTicks { .. } | Error::IrregularTicks { .. } | Error::EdgesNotFound { .. } => EXIT_CALIBRATION,
            Error::NoLinesFound => EXIT_NO_LINES,
            Error::PatchTooSmall { .. } => EXIT_PATCH_TOO_SMALL,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "mouldprint", version, about = "Chain and laid line measurement for handmade paper")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure the pixel size and print it as JSON.
    Calibrate(CalibrateArgs),
    /// Write spectral TV bands, the residual and a manifest.
    Decompose(DecomposeArgs),
    /// Detect chain lines and measure their distances.
    Chains(ChainArgs),
    /// Detect laid lines and measure their density.
    Laids(LaidArgs),
    /// Generate a synthetic image with ground truth.
    Phantom(PhantomArgs),
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x0, y0, w, h] => Ok(Rect::new(x0, y0, w, h)),
        _ => Err("expected x0,y0,w,h".into()),
    }
}

#[derive(Args, Debug, Default)]
struct CalibrationFlags {
    /// Pixels per millimetre, given directly.
    #[arg(long)]
    pixels_per_mm: Option<f64>,
    /// Ruler tick spacing in mm; ticks are found by edge detection.
    #[arg(long)]
    ruler_spacing_mm: Option<f64>,
    /// Direction along which the ruler ticks are laid out.
    #[arg(long, value_parser = parse_axis)]
    ruler_axis: Option<Axis>,
    /// Paper height in mm; the top and bottom paper edges are detected.
    #[arg(long)]
    paper_height_mm: Option<f64>,
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s {
        "horizontal" | "h" => Ok(Axis::Horizontal),
        "vertical" | "v" => Ok(Axis::Vertical),
        other => Err(format!("unknown axis `{other}`")),
    }
}

impl CalibrationFlags {
    fn source(&self) -> Result<Option<CalibrationSource>, Failure> {
        let given = [
            self.pixels_per_mm.is_some(),
            self.ruler_spacing_mm.is_some(),
            self.paper_height_mm.is_some(),
        ];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Failure::usage(
                "choose one of --pixels-per-mm, --ruler-spacing-mm, --paper-height-mm",
            ));
        }
        Ok(if let Some(p) = self.pixels_per_mm {
            Some(CalibrationSource::Explicit { pixels_per_mm: p })
        } else if let Some(s) = self.ruler_spacing_mm {
            Some(CalibrationSource::Ruler {
                tick_spacing_mm: s,
                axis: self.ruler_axis.unwrap_or(Axis::Horizontal),
                canny: Default::default(),
            })
        } else {
            self.paper_height_mm
                .map(|h| CalibrationSource::PaperSize {
                    paper_height_mm: h,
                    canny: Default::default(),
                })
        })
    }
}

/// Flags shared by the analysis commands.
#[derive(Args, Debug)]
struct CommonFlags {
    /// Input image (PNG, JPEG, PGM/PPM).
    input: Option<PathBuf>,
    /// JSON run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Patch rectangle `x0,y0,w,h`; defaults to the whole image.
    #[arg(long, value_parser = parse_rect)]
    patch: Option<Rect>,
    #[arg(long)]
    t_lo: Option<f64>,
    #[arg(long)]
    t_hi: Option<f64>,
    #[arg(long)]
    variant: Option<TvVariant>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    inner_max_iter: Option<usize>,
    /// Fail with exit code 4 when the TV solver hits its iteration cap.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    calibration: CalibrationFlags,
}

impl CommonFlags {
    fn config(&self) -> Result<RunConfig, Failure> {
        let flags = RunConfig {
            input: self.input.clone(),
            output: self.out.clone(),
            patch: self.patch,
            t_lo: self.t_lo,
            t_hi: self.t_hi,
            variant: self.variant,
            dt: self.dt,
            t_max: self.t_max,
            inner_tol: self.inner_tol,
            inner_max_iter: self.inner_max_iter,
            calibration: self.calibration.source()?,
            strict: self.strict.then_some(true),
            ..Default::default()
        };
        let file = match &self.config {
            Some(path) => RunConfig::load(path).map_err(Failure::usage)?,
            None => RunConfig::default(),
        };
        Ok(flags.over(file))
    }
}

/// Peak-detection flags.
#[derive(Args, Debug)]
struct PeakFlags {
    /// Gaussian smoothing of the 1D signal, in pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Absolute peak threshold on the smoothed signal.
    #[arg(long, conflicts_with = "threshold_fraction")]
    threshold: Option<f64>,
    /// Peak threshold as a fraction of the highest peak.
    #[arg(long)]
    threshold_fraction: Option<f64>,
    #[arg(long)]
    min_separation: Option<usize>,
}

impl PeakFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.sigma {
            cfg.smooth_sigma = Some(s);
        }
        if let Some(t) = self.threshold {
            cfg.threshold = Some(Threshold::Absolute(t));
        }
        if let Some(f) = self.threshold_fraction {
            cfg.threshold = Some(Threshold::FractionOfMax(f));
        }
        if let Some(m) = self.min_separation {
            cfg.min_separation = Some(m);
        }
    }
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    input: PathBuf,
    #[command(flatten)]
    calibration: CalibrationFlags,
    #[arg(long)]
    canny_sigma: Option<f64>,
    #[arg(long)]
    canny_low: Option<f64>,
    #[arg(long)]
    canny_high: Option<f64>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    common: CommonFlags,
    /// Ascending band edges; bands are `[0, e1), [e1, e2), ...` plus the
    /// residual.
    #[arg(long, value_delimiter = ',')]
    band_edges: Option<Vec<f64>>,
    /// Check that bands plus residual reconstruct the input.
    #[arg(long)]
    verify: bool,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[command(flatten)]
    common: CommonFlags,
    #[command(flatten)]
    peaks: PeakFlags,
    #[arg(long)]
    orientation: Option<Orientation>,
    /// Filter mask width in frequency rows (odd).
    #[arg(long)]
    filter_width: Option<usize>,
    /// Filter mask extent as a fraction of the frequency axis.
    #[arg(long)]
    filter_fraction: Option<f64>,
    /// The 3 px by 1/3 mask instead of the default 1 px by 2/3.
    #[arg(long)]
    johnson: bool,
    /// Line indices to leave out of the distances.
    #[arg(long, value_delimiter = ',')]
    omit: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct LaidArgs {
    #[command(flatten)]
    common: CommonFlags,
    #[command(flatten)]
    peaks: PeakFlags,
    #[arg(long)]
    angle_step: Option<f64>,
    /// Start of the 1 cm window, in pixels from the patch centre.
    #[arg(long, allow_hyphen_values = true)]
    window_anchor: Option<f64>,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// Named phantom.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    preset: Option<String>,
    /// Phantom spec as JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: PathBuf,
    /// File stem; defaults to the preset name or `phantom`.
    #[arg(long)]
    name: Option<String>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.output.clone().ok_or_else(|| Failure::usage("--out is required"))?;
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// The whole image (for calibration) and the analysis patch.
fn load_input(cfg: &RunConfig) -> Result<(GrayImage, GrayImage), Failure> {
    let path = cfg.input.as_ref().ok_or_else(|| Failure::usage("an input image is required"))?;
    let img = load_gray(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let patch = match cfg.patch {
        Some(r) => crop_patch(&img, r.x0, r.y0, r.w, r.h)?,
        None => img.clone(),
    };
    Ok((img, patch))
}

fn calibration(cfg: &RunConfig, img: &GrayImage) -> Result<Option<Calibration>, Failure> {
    cfg.calibration.as_ref().map(|s| s.calibrate(img)).transpose().map_err(Failure::from)
}

fn source_name(cfg: &RunConfig) -> Option<String> {
    cfg.input
        .as_ref()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
}

fn strict_check(cfg: &RunConfig, converged: bool) -> Outcome {
    if cfg.strict.unwrap_or(false) && !converged {
        return Err(Failure {
            code: EXIT_SOLVER,
            message: "TV solver hit its iteration cap (--strict)".into(),
        });
    }
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> Outcome {
    let mut source = a
        .calibration
        .source()?
        .ok_or_else(|| Failure::usage("choose --pixels-per-mm, --ruler-spacing-mm or --paper-height-mm"))?;
    if let CalibrationSource::Ruler { canny, .. } | CalibrationSource::PaperSize { canny, .. } = &mut source {
        canny.sigma = a.canny_sigma.unwrap_or(canny.sigma);
        canny.low = a.canny_low.unwrap_or(canny.low);
        canny.high = a.canny_high.unwrap_or(canny.high);
    }
    let img = load_gray(&a.input).map_err(|e| Failure::usage(format!("{}: {e}", a.input.display())))?;
    let cal = source.calibrate(&img)?;
    write!(out, "{}", to_json(&cal)?)?;
    Ok(())
}

fn cmd_decompose(a: &DecomposeArgs, out: &mut dyn Write) -> Outcome {
    let mut cfg = a.common.config()?;
    if a.band_edges.is_some() {
        cfg.band_edges = a.band_edges.clone();
    }
    let dir = out_dir(&cfg)?;
    let (_, patch) = load_input(&cfg)?;
    let flow = cfg.flow();
    let d = decompose(&patch, &cfg.decomposition_edges(), &flow)?;
    let original = a.verify.then(|| patch.to_field());
    let manifest = write_decomposition(&dir, &d, &flow, original.as_ref())?;
    write!(out, "{}", to_json(&manifest)?)?;
    strict_check(&cfg, manifest.diagnostics.nonconverged_steps.is_empty())?;
    if let Some(err) = manifest.verification_error {
        if err > 1e-6 {
            return Err(Failure {
                code: EXIT_SOLVER,
                message: format!("reconstruction error {err:.3e} exceeds 1e-6"),
            });
        }
    }
    Ok(())
}

fn overlay_png(patch: &GrayImage, report: OverlayReport<'_>) -> Result<Vec<u8>, Failure> {
    let overlay = render_overlay(&RgbImage::from_gray(patch), report)?;
    Ok(encode_png_rgb(&overlay)?)
}

fn cmd_chains(a: &ChainArgs, out: &mut dyn Write) -> Outcome {
    let mut cfg = a.common.config()?;
    a.peaks.apply(&mut cfg);
    if a.johnson {
        cfg.filter_width_px = Some(3);
        cfg.filter_height_fraction = Some(1.0 / 3.0);
    }
    cfg.filter_width_px = a.filter_width.or(cfg.filter_width_px);
    cfg.filter_height_fraction = a.filter_fraction.or(cfg.filter_height_fraction);
    cfg.orientation = a.orientation.or(cfg.orientation);
    cfg.omit = a.omit.clone().or(cfg.omit);

    let dir = out_dir(&cfg)?;
    let (img, patch) = load_input(&cfg)?;
    let cal = calibration(&cfg, &img)?;
    let mut report = detect_chain_lines(&patch, &cfg.chain_params(), cal.as_ref())?;
    if let Some(omit) = &cfg.omit {
        report = report.with_omitted(omit)?;
    }
    report.provenance.source = source_name(&cfg);
    report.provenance.patch = Some(cfg.patch.unwrap_or(Rect::full(img.width(), img.height())));
    let json = to_json(&report)?;
    std::fs::write(dir.join("report.json"), &json)?;
    std::fs::write(dir.join("overlay.png"), overlay_png(&patch, OverlayReport::Chain(&report))?)?;
    write!(out, "{json}")?;
    strict_check(&cfg, report.solver_converged)
}

fn cmd_laids(a: &LaidArgs, out: &mut dyn Write) -> Outcome {
    let mut cfg = a.common.config()?;
    a.peaks.apply(&mut cfg);
    cfg.angle_step_deg = a.angle_step.or(cfg.angle_step_deg);
    cfg.window_anchor_px = a.window_anchor.or(cfg.window_anchor_px);

    let dir = out_dir(&cfg)?;
    let (img, patch) = load_input(&cfg)?;
    let cal = calibration(&cfg, &img)?;
    let mut report = detect_laid_lines(&patch, &cfg.laid_params(), cal.as_ref())?;
    report.provenance.source = source_name(&cfg);
    report.provenance.patch = Some(cfg.patch.unwrap_or(Rect::full(img.width(), img.height())));
    let json = to_json(&report)?;
    std::fs::write(dir.join("report.json"), &json)?;
    std::fs::write(dir.join("overlay.png"), overlay_png(&patch, OverlayReport::Laid(&report))?)?;
    write!(out, "{json}")?;
    strict_check(&cfg, report.solver_converged)
}

fn cmd_phantom(a: &PhantomArgs, out: &mut dyn Write) -> Outcome {
    let mut spec: PhantomSpec = match (&a.preset, &a.spec) {
        (Some(name), _) => preset(name).ok_or_else(|| {
            Failure::usage(format!("unknown preset `{name}`; known: {}", PRESET_NAMES.join(", ")))
        })?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)?
        }
        (None, None) => return Err(Failure::usage("give --preset or --spec")),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let (img, truth) = generate(&spec)?;
    let stem = a.name.clone().or(a.preset.clone()).unwrap_or_else(|| "phantom".into());
    std::fs::create_dir_all(&a.out)?;
    let path = |ext: &str| a.out.join(format!("{stem}.{ext}"));
    std::fs::write(path("png"), encode_png_gray16(&img)?)?;
    std::fs::write(path("pgm"), encode_pgm(&img))?;
    std::fs::write(path("spec.json"), to_json(&spec)?)?;
    let truth_json = to_json(&truth)?;
    std::fs::write(path("truth.json"), &truth_json)?;
    write!(out, "{truth_json}")?;
    Ok(())
}

/// Runs the program on `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Calibrate(a) => cmd_calibrate(a, stdout),
        Command::Decompose(a) => cmd_decompose(a, stdout),
        Command::Chains(a) => cmd_chains(a, stdout),
        Command::Laids(a) => cmd_laids(a, stdout),
        Command::Phantom(a) => cmd_phantom(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

