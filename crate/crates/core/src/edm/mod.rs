//! Noise-conditioned denoisers, the sigma schedule and the Heun sampler.

mod denoiser;
mod external;
mod sampler;
mod schedule;

pub use denoiser::{
    denoise_gaussian, denoise_gmm, score, Denoiser, GaussianPrior, GmmComponent, GmmPrior,
};
pub use external::{ExternalDenoiser, DEFAULT_TIMEOUT};
pub use sampler::{
    heun_sample, heun_sample_from, heun_sample_traced, initial_noise, SamplerConfig, StepRecord,
};
pub use schedule::{
    sigma_schedule, SigmaSchedule, DEFAULT_RHO, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN,
    DEFAULT_STEPS,
};
