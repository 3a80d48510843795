//! Chain-line and laid-line measurement for handmade paper.
//!
//! Reflected-light photographs of laid paper carry the mould imprint only at
//! very low contrast, buried under ink, stains and noise. The pipeline here
//! isolates those imprints with a spectral total-variation decomposition and
//! then measures them in the Fourier and Radon domains:
//!
//! - [`image`], [`canny`], [`calibrate`], [`imageio`]: image carriers,
//!   greyscale conversion, patches, edge detection and pixel-size calibration.
//! - [`spectral`]: TV flow (isotropic and anisotropic), the spectral TV
//!   transform, band-pass filtering and full decomposition.
//! - [`transforms`]: rectangular Fourier filtering, axis projection, Radon
//!   transform and dominant-angle estimation.
//! - [`detect`]: peak detection and the chain-line / laid-line pipelines with
//!   their JSON reports and overlays.
//! - [`phantom`]: synthetic images with known ground truth.

pub mod calibrate;
pub mod canny;
pub mod detect;
pub mod error;
pub mod image;
pub mod imageio;
pub mod phantom;
pub mod spectral;
pub mod transforms;

pub use calibrate::{Axis, Calibration, CalibrationMethod, CalibrationSource};
pub use error::{Error, Result};
pub use image::{EdgeMask, Field, GrayImage, Rect, RgbImage};
pub use spectral::{SpectralDecomposition, TvFlowConfig, TvVariant};
pub use transforms::{Orientation, RectFilterSpec, Sinogram};
