use serde::{Deserialize, Serialize};

use super::ops::TvVariant;
use super::solver::ProxSolver;
use crate::error::{Error, Result};
use crate::image::{Field, GrayImage};

/// Discretisation of the TV flow. Scales are in the units of the `[0, 1]`
/// normalised intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvFlowConfig {
    pub dt: f64,
    pub t_max: f64,
    pub variant: TvVariant,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for TvFlowConfig {
    fn default() -> Self {
        Self {
            dt: 0.013,
            t_max: 1.3,
            variant: TvVariant::Isotropic,
            inner_tol: 1e-5,
            // Early steps on noisy input take thousands of iterations; later
            // ones converge in tens from the warm start.
            inner_max_iter: 10_000,
        }
    }
}

impl TvFlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return bad(format!("t_max {} must be at least dt {}", self.t_max, self.dt));
        }
        if !(self.inner_tol > 0.0 && self.inner_tol < 1.0) {
            return bad(format!("inner_tol must lie in (0, 1), got {}", self.inner_tol));
        }
        if self.inner_max_iter == 0 {
            return bad("inner_max_iter must be at least 1".into());
        }
        Ok(())
    }

    /// Index of the last frame, `ceil(t_max / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    /// Flow steps (1-based frame index) whose inner solve hit the iteration
    /// cap; their last iterate was used.
    pub nonconverged_steps: Vec<usize>,
    /// Largest certified error bound relative to the step displacement.
    pub worst_relative_error: f64,
}

impl FlowDiagnostics {
    pub fn converged(&self) -> bool {
        self.nonconverged_steps.is_empty()
    }
}

/// Frames `u(t_i)` of the TV flow at `t_i = i * dt`.
#[derive(Debug, Clone)]
pub struct ScaleSpaceStack {
    pub times: Vec<f64>,
    pub frames: Vec<Field>,
    pub config: TvFlowConfig,
    pub diagnostics: FlowDiagnostics,
}

impl ScaleSpaceStack {
    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn last_index(&self) -> usize {
        self.frames.len() - 1
    }
}

/// Runs the TV flow with implicit (proximal) steps of size `dt`.
pub fn tv_flow(f: &GrayImage, cfg: &TvFlowConfig) -> Result<ScaleSpaceStack> {
    tv_flow_field(&f.to_field(), cfg)
}

pub fn tv_flow_field(f: &Field, cfg: &TvFlowConfig) -> Result<ScaleSpaceStack> {
    cfg.validate()?;
    let (w, h) = (f.width, f.height);
    let steps = cfg.steps();
    let mut solver = ProxSolver::new(w, h, cfg.variant);
    // Mean step of a flow that flattens `f` by `t_max`; keeps the relative
    // tolerance meaningful once structures have vanished.
    let mean = f.mean();
    let spread = f.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
    let min_displacement = cfg.dt * spread / cfg.t_max;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(f.clone());
    let mut diag = FlowDiagnostics {
        steps,
        ..Default::default()
    };
    for step in 1..=steps {
        let prev = &frames[step - 1];
        let mut next = Field::zeros(w, h);
        let outcome = solver.solve(
            &prev.data,
            cfg.dt,
            cfg.inner_tol,
            min_displacement,
            cfg.inner_max_iter,
            &mut next.data,
        );
        diag.total_iterations += outcome.iterations;
        diag.max_iterations = diag.max_iterations.max(outcome.iterations);
        if outcome.displacement > 0.0 {
            diag.worst_relative_error = diag
                .worst_relative_error
                .max(outcome.error_bound / outcome.displacement);
        }
        if !outcome.converged {
            diag.nonconverged_steps.push(step);
        }
        frames.push(next);
    }
    let times = (0..=steps).map(|i| i as f64 * cfg.dt).collect();
    Ok(ScaleSpaceStack {
        times,
        frames,
        config: *cfg,
        diagnostics: diag,
    })
}
