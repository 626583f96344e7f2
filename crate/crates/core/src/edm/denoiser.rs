//! Denoiser contract and closed-form MMSE denoisers for analytic priors.

use crate::data::ImageVec;
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;

/// MMSE denoiser `D(x; sigma) = E[x_0 | x_0 + sigma * n = x]`.
///
/// Implementations must return `x` unchanged at `sigma == 0`, preserve the
/// input shape, and be deterministic.
pub trait Denoiser: Send + Sync {
    fn evaluate(&self, x: &ImageVec, sigma: f64) -> Result<ImageVec>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn evaluate(&self, x: &ImageVec, sigma: f64) -> Result<ImageVec> {
        (**self).evaluate(x, sigma)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn evaluate(&self, x: &ImageVec, sigma: f64) -> Result<ImageVec> {
        (**self).evaluate(x, sigma)
    }
}

/// Independent per-pixel Gaussian prior `N(mean, diag(variance))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    mean: ImageVec,
    variance: Vec<f32>,
}

impl GaussianPrior {
    pub fn new(mean: ImageVec, variance: Vec<f32>) -> Result<Self> {
        if variance.len() != mean.len() {
            return Err(Error::shape("prior variance", mean.len(), variance.len()));
        }
        if let Some(v) = variance.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "prior variance must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self { mean, variance })
    }

    /// Same mean and variance at every pixel.
    pub fn isotropic(grid: &ImagingGrid, mean: f32, variance: f32) -> Result<Self> {
        Self::new(ImageVec::filled(grid.clone(), mean), vec![variance; grid.len()])
    }

    pub fn mean(&self) -> &ImageVec {
        &self.mean
    }

    pub fn variance(&self) -> &[f32] {
        &self.variance
    }
}

#[inline]
fn shrink(x: f64, mean: f64, var: f64, s2: f64) -> f64 {
    mean + var / (var + s2) * (x - mean)
}

/// Posterior mean under a Gaussian prior: `mu + v / (v + sigma^2) (x - mu)`.
pub fn denoise_gaussian(x: &ImageVec, sigma: f64, prior: &GaussianPrior) -> Result<ImageVec> {
    x.check_same_shape(&prior.mean)?;
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let s2 = sigma * sigma;
    let out = x
        .data()
        .iter()
        .zip(prior.mean.data())
        .zip(&prior.variance)
        .map(|((&xv, &m), &v)| shrink(xv as f64, m as f64, v as f64, s2) as f32)
        .collect();
    x.with_data(out)
}

impl Denoiser for GaussianPrior {
    fn evaluate(&self, x: &ImageVec, sigma: f64) -> Result<ImageVec> {
        denoise_gaussian(x, sigma, self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: ImageVec,
    pub variance: Vec<f32>,
}

/// Per-pixel Gaussian mixture prior with shared component weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPrior {
    components: Vec<GmmComponent>,
}

impl GmmPrior {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("mixture has no components".into()))?;
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        for c in &components {
            if !(c.weight > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "mixture weight must be positive, got {}",
                    c.weight
                )));
            }
            c.mean.check_same_shape(&first.mean)?;
            if c.variance.len() != c.mean.len() {
                return Err(Error::shape("component variance", c.mean.len(), c.variance.len()));
            }
            if c.variance.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(
                    "component variance must be finite and >= 0".into(),
                ));
            }
        }
        Ok(Self { components })
    }

    /// Components whose mean and variance are constant over the grid.
    pub fn isotropic(grid: &ImagingGrid, components: &[(f64, f32, f32)]) -> Result<Self> {
        Self::new(
            components
                .iter()
                .map(|&(weight, mean, var)| GmmComponent {
                    weight,
                    mean: ImageVec::filled(grid.clone(), mean),
                    variance: vec![var; grid.len()],
                })
                .collect(),
        )
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }
}

/// Posterior mean under a per-pixel Gaussian mixture. Responsibilities are
/// normalized in log space so they never underflow to an all-zero set.
pub fn denoise_gmm(x: &ImageVec, sigma: f64, prior: &GmmPrior) -> Result<ImageVec> {
    let comps = &prior.components;
    x.check_same_shape(&comps[0].mean)?;
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let s2 = sigma * sigma;
    let log_w: Vec<f64> = comps.iter().map(|c| c.weight.ln()).collect();
    let mut logits = vec![0f64; comps.len()];
    let out = (0..x.len())
        .map(|p| {
            let xv = x.data()[p] as f64;
            for (k, c) in comps.iter().enumerate() {
                let var = c.variance[p] as f64 + s2;
                let d = xv - c.mean.data()[p] as f64;
                logits[k] = log_w[k] - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
                    - d * d / (2.0 * var);
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            comps
                .iter()
                .zip(&logits)
                .map(|(c, l)| {
                    let r = (l - max).exp() / total;
                    r * shrink(xv, c.mean.data()[p] as f64, c.variance[p] as f64, s2)
                })
                .sum::<f64>() as f32
        })
        .collect();
    x.with_data(out)
}

impl Denoiser for GmmPrior {
    fn evaluate(&self, x: &ImageVec, sigma: f64) -> Result<ImageVec> {
        denoise_gmm(x, sigma, self)
    }
}

/// Score estimate `(D(x; sigma) - x) / sigma^2` of `grad log p_sigma(x)`.
pub fn score(x: &ImageVec, sigma: f64, d: &dyn Denoiser) -> Result<ImageVec> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "score needs sigma > 0, got {sigma}"
        )));
    }
    let den = d.evaluate(x, sigma)?;
    x.check_same_shape(&den)?;
    let s2 = sigma * sigma;
    let out = den
        .data()
        .iter()
        .zip(x.data())
        .map(|(&dv, &xv)| ((dv as f64 - xv as f64) / s2) as f32)
        .collect();
    x.with_data(out)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")))
    }
}
