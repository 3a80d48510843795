//! Spectral total-variation decomposition.
//!
//! The TV flow `u_t = div(Du / |Du|)` with Neumann boundary is integrated by
//! implicit steps, each one a TV proximal problem solved through its dual
//! by accelerated projected gradient. The transform `phi(t) = t * u_tt(t)`
//! responds with an impulse at the scale where a TV eigen-structure (a disk
//! for isotropic TV, a rectangle for anisotropic TV) vanishes, at
//! `t = contrast * area / perimeter`. Band-pass filtering over a scale
//! interval then isolates structures by size and contrast: noise sits near
//! `t = 0`, faint mould lines at small scales and ink at large ones.

mod decompose;
pub mod export;
mod flow;
mod ops;
mod solver;

pub use decompose::{
    band_from_stack, band_pass, decompose, decompose_stack, residual_from_stack, spectral_response,
    SpectralDecomposition, SpectralResponse, SpectrumSample,
};
pub use flow::{tv_flow, tv_flow_field, FlowDiagnostics, ScaleSpaceStack, TvFlowConfig};
pub use ops::{tv_functional, TvVariant};
pub use solver::{ProxOutcome, ProxSolver};
