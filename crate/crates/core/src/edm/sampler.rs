use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::denoiser::Denoiser;
use super::schedule::SigmaSchedule;
use crate::data::ImageVec;
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;
use crate::guidance::{guidance_step_traced, GuidanceConfig};

#[derive(Debug, Clone)]
pub struct SamplerConfig<'a> {
    pub schedule: SigmaSchedule,
    pub seed: u64,
    pub guidance: Option<GuidanceConfig<'a>>,
}

impl Default for SamplerConfig<'_> {
    fn default() -> Self {
        Self {
            schedule: SigmaSchedule::default(),
            seed: 0,
            guidance: None,
        }
    }
}

/// Per-step record of a sampling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub sigma: f64,
    pub sigma_next: f64,
    /// Guidance weight, 0 when unguided.
    pub lambda: f64,
    /// `||Hx - y||` before the guidance update, NaN when unguided.
    pub residual_norm: f64,
}

/// `N(0, sigma^2 I)` draws in row-major order from a generator keyed by `seed`.
pub fn initial_noise(grid: &ImagingGrid, sigma: f64, seed: u64) -> ImageVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len())
        .map(|_| {
            let n: f64 = StandardNormal.sample(&mut rng);
            (sigma * n) as f32
        })
        .collect();
    ImageVec::new(grid.clone(), data).expect("length matches grid")
}

/// Deterministic Heun sampler for the probability-flow ODE
/// `dx/dsigma = (x - D(x; sigma)) / sigma`, starting from seeded noise at
/// `sigma_max`. Guidance, when configured, is applied after each full step.
pub fn heun_sample(d: &dyn Denoiser, cfg: &SamplerConfig, grid: &ImagingGrid) -> Result<ImageVec> {
    heun_sample_traced(d, cfg, grid).map(|(x, _)| x)
}

pub fn heun_sample_traced(
    d: &dyn Denoiser,
    cfg: &SamplerConfig,
    grid: &ImagingGrid,
) -> Result<(ImageVec, Vec<StepRecord>)> {
    let x0 = initial_noise(grid, cfg.schedule.levels()[0], cfg.seed);
    heun_sample_from(d, cfg, x0)
}

/// Runs the sampler from an explicit starting image at `sigma_max`.
pub fn heun_sample_from(
    d: &dyn Denoiser,
    cfg: &SamplerConfig,
    init: ImageVec,
) -> Result<(ImageVec, Vec<StepRecord>)> {
    if let Some(g) = &cfg.guidance {
        g.validate()?;
        init.check_same_shape(&ImageVec::zeros(g.operator.grid().clone()))?;
    }
    let levels = cfg.schedule.levels();
    let n = cfg.schedule.steps();
    let mut x = init;
    let mut records = Vec::with_capacity(n);
    let mut slope = vec![0f64; x.len()];

    for i in 0..n {
        let (s, s_next) = (levels[i], levels[i + 1]);
        let h = s_next - s;
        let den = d.evaluate(&x, s)?;
        x.check_same_shape(&den)?;
        for ((dv, &xv), &yv) in slope.iter_mut().zip(x.data()).zip(den.data()) {
            *dv = (xv as f64 - yv as f64) / s;
        }
        let euler: Vec<f32> = x
            .data()
            .iter()
            .zip(&slope)
            .map(|(&xv, &dv)| (xv as f64 + h * dv) as f32)
            .collect();
        let euler = x.with_data(euler)?;
        x = if s_next > 0.0 {
            let den2 = d.evaluate(&euler, s_next)?;
            euler.check_same_shape(&den2)?;
            let out = x
                .data()
                .iter()
                .zip(&slope)
                .zip(euler.data().iter().zip(den2.data()))
                .map(|((&xv, &dv), (&ev, &yv))| {
                    let dv2 = (ev as f64 - yv as f64) / s_next;
                    (xv as f64 + h * 0.5 * (dv + dv2)) as f32
                })
                .collect();
            x.with_data(out)?
        } else {
            euler
        };

        let mut record = StepRecord {
            sigma: s,
            sigma_next: s_next,
            lambda: 0.0,
            residual_norm: f64::NAN,
        };
        if let Some(g) = &cfg.guidance {
            let (next, trace) = guidance_step_traced(&x, g, i, n)?;
            x = next;
            record.lambda = trace.lambda;
            record.residual_norm = trace.residual_norm;
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "sample became non-finite at step {i} (sigma {s})"
            )));
        }
        records.push(record);
    }
    Ok((x, records))
}
