//! Data-consistency guidance applied after each sampler step:
//! `x <- x - lambda_i * grad( ||H x - y|| + alpha R(x) )`, with a sine-shaped
//! weight that vanishes at both ends of the trajectory.

use crate::data::{self, ImageVec, RfFrame};
use crate::error::{Error, Result};
use crate::operator::SparseOperator;

/// Residual norms below this produce a zero gradient in [`ResidualMode::Norm`].
pub const RESIDUAL_FLOOR: f64 = 1e-12;
pub const DEFAULT_TV_EPSILON: f64 = 1e-3;
pub const DEFAULT_LAMBDA_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMode {
    /// Gradient of `||Hx - y||_2`: `H^T r / ||r||`.
    #[default]
    Norm,
    /// Gradient of `0.5 ||Hx - y||^2`: `H^T r`.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularizer {
    #[default]
    None,
    TotalVariation,
}

#[derive(Debug, Clone)]
pub struct GuidanceConfig<'a> {
    pub operator: &'a SparseOperator,
    pub observed: &'a RfFrame,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub alpha: f64,
    pub residual_mode: ResidualMode,
    pub regularizer: Regularizer,
    pub tv_epsilon: f64,
}

impl<'a> GuidanceConfig<'a> {
    pub fn new(operator: &'a SparseOperator, observed: &'a RfFrame) -> Self {
        Self {
            operator,
            observed,
            lambda_max: DEFAULT_LAMBDA_MAX,
            lambda_min: 0.0,
            alpha: 0.0,
            residual_mode: ResidualMode::Norm,
            regularizer: Regularizer::None,
            tv_epsilon: DEFAULT_TV_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min >= 0.0 && self.lambda_min <= self.lambda_max)
            || !self.lambda_max.is_finite()
        {
            return Err(Error::Config(format!(
                "need 0 <= lambda_min <= lambda_max, got {} and {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.tv_epsilon > 0.0) {
            return Err(Error::Config(format!(
                "tv_epsilon must be positive, got {}",
                self.tv_epsilon
            )));
        }
        if self.observed.len() != self.operator.rows() {
            return Err(Error::shape(
                "observed rf",
                self.operator.rows(),
                self.observed.len(),
            ));
        }
        Ok(())
    }
}

/// `lambda_min + (lambda_max - lambda_min) sin(pi i / (N - 1))`, evaluated
/// from the nearer end so both endpoints are exact. `N == 1` gives `lambda_max`.
pub fn lambda_schedule(step: usize, n_steps: usize, cfg: &GuidanceConfig) -> f64 {
    debug_assert!(step < n_steps);
    if n_steps <= 1 {
        return cfg.lambda_max;
    }
    let m = step.min(n_steps - 1 - step) as f64;
    let phase = std::f64::consts::PI * m / (n_steps - 1) as f64;
    cfg.lambda_min + (cfg.lambda_max - cfg.lambda_min) * phase.sin()
}

/// Gradient of the data-consistency term and the residual norm `||Hx - y||`.
pub fn dc_gradient(cfg: &GuidanceConfig, x: &ImageVec) -> Result<(ImageVec, f64)> {
    let op = cfg.operator;
    let mut r = vec![0f32; op.rows()];
    op.forward_into(x.data(), &mut r)?;
    let y = cfg.observed.data();
    if y.len() != r.len() {
        return Err(Error::shape("observed rf", r.len(), y.len()));
    }
    r.iter_mut().zip(y).for_each(|(a, &b)| *a -= b);
    let norm = data::norm(&r);
    let mut g = vec![0f32; op.cols()];
    match cfg.residual_mode {
        ResidualMode::Squared => op.adjoint_into(&r, &mut g)?,
        ResidualMode::Norm => {
            if norm >= RESIDUAL_FLOOR {
                op.adjoint_into(&r, &mut g)?;
                g.iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
            }
        }
    }
    Ok((x.with_data(g)?, norm))
}

/// Smoothed isotropic total variation
/// `R(x) = sum_p sqrt(dx_p^2 + dz_p^2 + eps^2)` with forward differences
/// that vanish past the last row/column, and its exact gradient.
pub fn tv_value_grad(x: &ImageVec, epsilon: f64) -> Result<(f64, ImageVec)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tv epsilon must be positive, got {epsilon}"
        )));
    }
    let g = x.grid();
    let (nz, nx) = (g.num_axial, g.num_lateral);
    let v = |i: usize, j: usize| x.data()[i * nx + j] as f64;
    let eps2 = epsilon * epsilon;
    let mut value = 0.0;
    let mut grad = vec![0f64; nz * nx];
    for i in 0..nz {
        for j in 0..nx {
            let c = v(i, j);
            let dl = if j + 1 < nx { v(i, j + 1) - c } else { 0.0 };
            let da = if i + 1 < nz { v(i + 1, j) - c } else { 0.0 };
            let mag = (dl * dl + da * da + eps2).sqrt();
            value += mag;
            let (wl, wa) = (dl / mag, da / mag);
            grad[i * nx + j] -= wl + wa;
            if j + 1 < nx {
                grad[i * nx + j + 1] += wl;
            }
            if i + 1 < nz {
                grad[(i + 1) * nx + j] += wa;
            }
        }
    }
    Ok((value, x.with_data(grad.into_iter().map(|a| a as f32).collect())?))
}

/// One explicit gradient step of the guidance objective at sampler step `i`.
pub fn guidance_step(
    x: &ImageVec,
    cfg: &GuidanceConfig,
    step: usize,
    n_steps: usize,
) -> Result<ImageVec> {
    guidance_step_traced(x, cfg, step, n_steps).map(|(x, _)| x)
}

/// Applied weight and residual norm before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceTrace {
    pub lambda: f64,
    pub residual_norm: f64,
}

pub fn guidance_step_traced(
    x: &ImageVec,
    cfg: &GuidanceConfig,
    step: usize,
    n_steps: usize,
) -> Result<(ImageVec, GuidanceTrace)> {
    if step >= n_steps {
        return Err(Error::InvalidArgument(format!(
            "guidance step {step} out of range for {n_steps} steps"
        )));
    }
    let lambda = lambda_schedule(step, n_steps, cfg);
    let (dc, residual_norm) = dc_gradient(cfg, x)?;
    let trace = GuidanceTrace {
        lambda,
        residual_norm,
    };
    if lambda == 0.0 {
        return Ok((x.clone(), trace));
    }
    let tv = match cfg.regularizer {
        Regularizer::TotalVariation if cfg.alpha > 0.0 => Some(tv_value_grad(x, cfg.tv_epsilon)?.1),
        _ => None,
    };
    let out = (0..x.len())
        .map(|p| {
            let mut g = dc.data()[p] as f64;
            if let Some(tv) = &tv {
                g += cfg.alpha * tv.data()[p] as f64;
            }
            (x.data()[p] as f64 - lambda * g) as f32
        })
        .collect();
    Ok((x.with_data(out)?, trace))
}
