use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::data::ImageVec;
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;

pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 60.0;

/// Log-compressed image, values in `[-dynamic_range_db, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmodeImage {
    pub grid: ImagingGrid,
    pub data_db: Vec<f32>,
    pub dynamic_range_db: f64,
}

/// Magnitude of the analytic signal of every lateral column, taken along
/// depth. Columns are zero-padded to a power of two before the transform.
pub fn envelope(x: &ImageVec) -> Result<ImageVec> {
    let g = x.grid();
    let (nz, nx) = (g.num_axial, g.num_lateral);
    if nz < 4 {
        return Err(Error::InvalidArgument(format!(
            "envelope needs at least 4 axial samples, got {nz}"
        )));
    }
    let m = nz.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let data = x.data();

    let columns: Vec<Vec<f32>> = (0..nx)
        .into_par_iter()
        .map(|j| {
            let mut buf: Vec<Complex<f64>> = (0..m)
                .map(|i| Complex::new(if i < nz { data[i * nx + j] as f64 } else { 0.0 }, 0.0))
                .collect();
            fwd.process(&mut buf);
            // One-sided spectrum: keep DC and Nyquist, double positive bins.
            for v in &mut buf[1..m / 2] {
                *v *= 2.0;
            }
            for v in &mut buf[m / 2 + 1..] {
                *v = Complex::new(0.0, 0.0);
            }
            inv.process(&mut buf);
            let scale = 1.0 / m as f64;
            buf[..nz].iter().map(|c| (c.norm() * scale) as f32).collect()
        })
        .collect();

    let mut out = vec![0f32; nz * nx];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            out[i * nx + j] = v;
        }
    }
    x.with_data(out)
}

/// `20 log10(env / max env)`, clipped at `-dynamic_range_db`.
pub fn bmode(env: &ImageVec, dynamic_range_db: f64) -> Result<BmodeImage> {
    if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dynamic range must be > 0 dB, got {dynamic_range_db}"
        )));
    }
    let mut peak = 0.0f64;
    for &v in env.data() {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "envelope must be finite and nonnegative, found {v}"
            )));
        }
        peak = peak.max(v as f64);
    }
    if peak == 0.0 {
        return Err(Error::DegenerateInput("envelope is identically zero".into()));
    }
    let data_db = env
        .data()
        .iter()
        .map(|&v| {
            let db = 20.0 * (v as f64 / peak).log10();
            db.max(-dynamic_range_db) as f32
        })
        .collect();
    Ok(BmodeImage {
        grid: env.grid().clone(),
        data_db,
        dynamic_range_db,
    })
}
