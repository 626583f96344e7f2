use crate::data::ImageVec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Axial,
    Lateral,
}

/// Full width at half maximum of a sampled profile around `peak`, with
/// linearly interpolated crossings, in units of `spacing`.
pub fn fwhm_profile(profile: &[f64], peak: usize, spacing: f64) -> Result<f64> {
    let n = profile.len();
    if peak >= n {
        return Err(Error::InvalidArgument(format!("peak {peak} outside profile of {n}")));
    }
    let p = profile[peak];
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::MeasurementUndefined(format!("profile peak value {p} is not positive")));
    }
    if (peak > 0 && profile[peak - 1] > p) || (peak + 1 < n && profile[peak + 1] > p) {
        return Err(Error::InvalidArgument(format!("sample {peak} is not a local maximum")));
    }
    let half = 0.5 * p;

    let left = (0..peak)
        .rev()
        .find(|&k| profile[k] <= half)
        .map(|k| k as f64 + (half - profile[k]) / (profile[k + 1] - profile[k]));
    let right = (peak + 1..n)
        .find(|&k| profile[k] <= half)
        .map(|k| (k - 1) as f64 + (profile[k - 1] - half) / (profile[k - 1] - profile[k]));
    match (left, right) {
        (Some(l), Some(r)) => Ok((r - l) * spacing),
        _ => Err(Error::MeasurementUndefined(
            "profile does not fall to half maximum on both sides".into(),
        )),
    }
}

/// FWHM in metres of `env` through `peak` along `axis`.
pub fn fwhm(env: &ImageVec, peak: (usize, usize), axis: Axis) -> Result<f64> {
    let g = env.grid();
    let (pi, pj) = peak;
    if pi >= g.num_axial || pj >= g.num_lateral {
        return Err(Error::InvalidArgument(format!("peak ({pi}, {pj}) outside grid")));
    }
    match axis {
        Axis::Axial => {
            let prof: Vec<f64> = (0..g.num_axial).map(|i| env.get(i, pj) as f64).collect();
            fwhm_profile(&prof, pi, g.dz)
        }
        Axis::Lateral => {
            let prof: Vec<f64> = (0..g.num_lateral).map(|j| env.get(pi, j) as f64).collect();
            fwhm_profile(&prof, pj, g.dx)
        }
    }
}

/// Brightest pixel within `radius` pixels (Chebyshev) of `center`.
pub fn find_peak_near(env: &ImageVec, center: (usize, usize), radius: usize) -> (usize, usize) {
    let g = env.grid();
    let (ci, cj) = (center.0.min(g.num_axial - 1), center.1.min(g.num_lateral - 1));
    let mut best = (ci, cj);
    for i in ci.saturating_sub(radius)..=(ci + radius).min(g.num_axial - 1) {
        for j in cj.saturating_sub(radius)..=(cj + radius).min(g.num_lateral - 1) {
            if env.get(i, j) > env.get(best.0, best.1) {
                best = (i, j);
            }
        }
    }
    best
}
