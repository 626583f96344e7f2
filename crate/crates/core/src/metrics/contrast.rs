use super::roi::Roi;
use crate::data::ImageVec;
use crate::error::{Error, Result};

pub const DEFAULT_GCNR_BINS: usize = 256;

/// Returned by [`cnr`] when the two means coincide, standing in for -inf dB.
pub const CNR_ZERO_CONTRAST: f64 = f64::MIN;

/// Which representation of the image CNR is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CnrDomain {
    /// Linear envelope amplitude.
    #[default]
    Envelope,
    /// Log-compressed decibel values.
    LogCompressed,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// `20 log10(|mu_a - mu_b| / sqrt(var_a + var_b))` with population variances.
pub fn cnr_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::DegenerateInput("CNR needs two nonempty regions".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let pooled = va + vb;
    if pooled <= 0.0 {
        return Err(Error::DegenerateInput(
            "CNR undefined: both regions have zero variance".into(),
        ));
    }
    let diff = (ma - mb).abs();
    if diff == 0.0 {
        return Ok(CNR_ZERO_CONTRAST);
    }
    Ok(20.0 * (diff / pooled.sqrt()).log10())
}

/// CNR in dB on the linear envelope.
pub fn cnr(env: &ImageVec, a: &Roi, b: &Roi) -> Result<f64> {
    cnr_samples(&a.values(env.data()), &b.values(env.data()))
}

/// CNR on either the envelope or its log compression with the given range.
pub fn cnr_in(env: &ImageVec, a: &Roi, b: &Roi, domain: CnrDomain, dynamic_range_db: f64) -> Result<f64> {
    match domain {
        CnrDomain::Envelope => cnr(env, a, b),
        CnrDomain::LogCompressed => {
            let bm = super::bmode(env, dynamic_range_db)?;
            cnr_samples(&a.values(&bm.data_db), &b.values(&bm.data_db))
        }
    }
}

/// Generalized CNR: one minus the overlap of the two normalized histograms
/// over `bins` shared equal-width bins spanning both sample sets.
pub fn gcnr_samples(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("gCNR needs >= 2 bins, got {bins}")));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::DegenerateInput("gCNR needs two nonempty regions".into()));
    }
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("gCNR samples must be finite".into()));
    }
    let bin = |v: f64| -> usize {
        if hi == lo {
            0
        } else {
            (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
        }
    };
    let (mut ha, mut hb) = (vec![0u64; bins], vec![0u64; bins]);
    a.iter().for_each(|&v| ha[bin(v)] += 1);
    b.iter().for_each(|&v| hb[bin(v)] += 1);
    // Exact integer overlap: sum_k min(ca/na, cb/nb) * na * nb.
    let (na, nb) = (a.len() as u128, b.len() as u128);
    let overlap: u128 = ha
        .iter()
        .zip(&hb)
        .map(|(&ca, &cb)| (ca as u128 * nb).min(cb as u128 * na))
        .sum();
    Ok(1.0 - overlap as f64 / (na * nb) as f64)
}

pub fn gcnr(env: &ImageVec, a: &Roi, b: &Roi, bins: usize) -> Result<f64> {
    gcnr_samples(&a.values(env.data()), &b.values(env.data()), bins)
}

/// Largest envelope value outside the `(2r+1)^2` neighbourhoods of `peaks`,
/// in dB relative to the largest value at the peaks themselves.
pub fn max_sidelobe_db(env: &ImageVec, peaks: &[(usize, usize)], radius: usize) -> Result<f64> {
    let g = env.grid();
    if peaks.is_empty() {
        return Err(Error::InvalidArgument("no peak pixels given".into()));
    }
    let mut excluded = vec![false; g.len()];
    let mut reference = 0.0f64;
    for &(pi, pj) in peaks {
        if pi >= g.num_axial || pj >= g.num_lateral {
            return Err(Error::InvalidArgument(format!("peak ({pi}, {pj}) outside grid")));
        }
        reference = reference.max(env.get(pi, pj) as f64);
        for i in pi.saturating_sub(radius)..=(pi + radius).min(g.num_axial - 1) {
            for j in pj.saturating_sub(radius)..=(pj + radius).min(g.num_lateral - 1) {
                excluded[g.index(i, j)] = true;
            }
        }
    }
    if reference <= 0.0 {
        return Err(Error::DegenerateInput("envelope is zero at every peak".into()));
    }
    let side = env
        .data()
        .iter()
        .zip(&excluded)
        .filter(|(_, &ex)| !ex)
        .map(|(&v, _)| v as f64)
        .fold(0.0f64, f64::max);
    if side == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (side / reference).log10())
}
