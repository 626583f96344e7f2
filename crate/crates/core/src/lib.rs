//! Plane-wave ultrasound reconstruction: a sparse time-of-flight measurement
//! operator, RF simulation from synthetic phantoms, delay-and-sum
//! beamforming, and diffusion-prior sampling with data-consistency guidance.

pub mod cli;
pub mod das;
pub mod data;
pub mod edm;
pub mod error;
pub mod geometry;
pub mod guidance;
pub mod io;
pub mod metrics;
pub mod operator;
pub mod phantom;

pub use das::{das_compound, das_compound_with, das_single, das_single_with, DasOptions};
pub use data::{ImageVec, RfFrame};
pub use error::{Error, Result};
pub use geometry::{
    rx_delay, sample_index, tx_delay, AcquisitionConfig, Fingerprint, ImagingGrid,
    PlaneWaveSequence, TransducerConfig,
};
pub use guidance::{
    dc_gradient, guidance_step, lambda_schedule, tv_value_grad, GuidanceConfig, Regularizer,
    ResidualMode,
};
pub use operator::{build_measurement_matrix, build_measurement_matrix_with, Interpolation, SparseOperator};
pub use phantom::{make_cyst_phantom, make_point_phantom, simulate_rf, Disc, NoiseModel, Scene, SceneDescription};
