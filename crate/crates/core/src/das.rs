//! Delay-and-sum beamforming for steered plane waves.
//!
//! With the default options (linear interpolation, no apodization) the single
//! plane-wave beamformer is exactly `H^T` for the same angle: both walk the
//! elements in order and use the shared interpolation taps.

use rayon::prelude::*;

use crate::data::{ImageVec, RfFrame};
use crate::error::{Error, Result};
use crate::geometry::{AcquisitionConfig, DelayModel};
use crate::operator::{taps, Interpolation};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DasOptions {
    /// Receive f-number; elements with `|x - x_e| > z / (2F)` are skipped.
    /// `None` uses the full aperture.
    pub f_number: Option<f64>,
    pub interpolation: Interpolation,
}

pub fn das_single(rf: &RfFrame, acq: &AcquisitionConfig, angle: f64) -> Result<ImageVec> {
    das_single_with(rf, acq, angle, DasOptions::default())
}

pub fn das_single_with(
    rf: &RfFrame,
    acq: &AcquisitionConfig,
    angle: f64,
    opts: DasOptions,
) -> Result<ImageVec> {
    let t = acq.transducer();
    let grid = acq.grid();
    rf.check_matches(t)?;
    if !(angle.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "steering angle {angle} rad outside (-pi/2, pi/2)"
        )));
    }
    if let Some(f) = opts.f_number {
        if !(f > 0.0) {
            return Err(Error::InvalidArgument(format!("f-number must be positive, got {f}")));
        }
    }
    let model = DelayModel::new(t, angle);
    let elements: Vec<f64> = (0..t.num_elements).map(|k| t.element_x(k)).collect();
    let ns = t.num_samples;
    let y = rf.data();

    let mut out = vec![0f32; grid.len()];
    out.par_iter_mut()
        .with_min_len(256)
        .enumerate()
        .for_each(|(p, o)| {
            let (x, z) = grid.position(p / grid.num_lateral, p % grid.num_lateral);
            let half_aperture = opts.f_number.map(|f| z / (2.0 * f));
            let tx = model.tx(x, z);
            let mut acc = 0.0f64;
            for (k, &xe) in elements.iter().enumerate() {
                if let Some(h) = half_aperture {
                    if (x - xe).abs() > h {
                        continue;
                    }
                }
                let s = model.sample(tx + model.rx(x, z, xe));
                if let Some(tp) = taps(s, ns, opts.interpolation) {
                    for (si, w) in tp.iter() {
                        acc += w as f64 * y[k * ns + si] as f64;
                    }
                }
            }
            *o = acc as f32;
        });
    ImageVec::new(grid.clone(), out)
}

/// Coherent compounding: the mean of the single-angle beamformed images,
/// one frame per angle of `acq.sequence()` in order.
pub fn das_compound(rfs: &[RfFrame], acq: &AcquisitionConfig) -> Result<ImageVec> {
    das_compound_with(rfs, acq, DasOptions::default())
}

pub fn das_compound_with(
    rfs: &[RfFrame],
    acq: &AcquisitionConfig,
    opts: DasOptions,
) -> Result<ImageVec> {
    let seq = acq.sequence();
    if rfs.len() != seq.len() {
        return Err(Error::shape("rf frame count", seq.len(), rfs.len()));
    }
    let mut sum = vec![0f64; acq.grid().len()];
    for (rf, angle) in rfs.iter().zip(seq.angles()) {
        let img = das_single_with(rf, acq, angle, opts)?;
        sum.iter_mut()
            .zip(img.data())
            .for_each(|(s, &v)| *s += v as f64);
    }
    let n = rfs.len() as f64;
    ImageVec::new(
        acq.grid().clone(),
        sum.into_iter().map(|s| (s / n) as f32).collect(),
    )
}
