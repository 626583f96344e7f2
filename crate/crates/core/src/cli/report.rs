use serde::{Deserialize, Serialize};

use crate::data::ImageVec;
use crate::error::Result;
use crate::geometry::ImagingGrid;
use crate::metrics::{self, Axis, CnrDomain, Roi, RoiShape};

/// Measurement targets, positions in metres.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiDocument {
    #[serde(default)]
    pub points: Vec<PointTarget>,
    #[serde(default)]
    pub contrast: Vec<ContrastPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointTarget {
    pub name: String,
    pub x_m: f64,
    pub z_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastPair {
    pub name: String,
    pub target: RoiShape,
    pub background: RoiShape,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub name: String,
    pub peak: [usize; 2],
    pub axial_fwhm_m: Option<f64>,
    pub lateral_fwhm_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastResult {
    pub name: String,
    /// `f64::MIN` stands for zero contrast.
    pub cnr_db: f64,
    pub gcnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSettings {
    pub gcnr_bins: usize,
    pub cnr_domain: &'static str,
    pub dynamic_range_db: f64,
    pub search_px: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub grid: ImagingGrid,
    pub settings: MeasureSettings,
    pub points: Vec<PointResult>,
    pub contrast: Vec<ContrastResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub points: Vec<PointResult>,
    pub mean_axial_fwhm_m: Option<f64>,
    pub mean_lateral_fwhm_m: Option<f64>,
    pub max_sidelobe_db: Option<f64>,
    pub contrast: Vec<ContrastResult>,
}

/// Settings that produced a comparison, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub num_angles: usize,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub single_angle_index: usize,
    pub single_angle_deg: f64,
    pub noise_std: f64,
    pub noise_seed: u64,
    pub steps: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub prior: String,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub alpha: f64,
    pub residual: String,
    pub regularizer: String,
    pub seed: u64,
    pub sidelobe_radius_px: usize,
    pub acquisition_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub provenance: Provenance,
    pub settings: MeasureSettings,
    pub methods: Vec<MethodReport>,
}

pub(crate) struct Measure {
    pub bins: usize,
    pub domain: CnrDomain,
    pub dynamic_range_db: f64,
    pub search_px: usize,
}

impl Measure {
    pub fn settings(&self) -> MeasureSettings {
        MeasureSettings {
            gcnr_bins: self.bins,
            cnr_domain: match self.domain {
                CnrDomain::Envelope => "envelope",
                CnrDomain::LogCompressed => "log",
            },
            dynamic_range_db: self.dynamic_range_db,
            search_px: self.search_px,
        }
    }

    /// FWHM at each point; a width that cannot be measured is recorded as null.
    pub fn points(&self, env: &ImageVec, targets: &[PointTarget]) -> Result<Vec<PointResult>> {
        let g = env.grid();
        targets
            .iter()
            .map(|t| {
                let Some(center) = g.nearest_pixel(t.x_m, t.z_m) else {
                    return Err(crate::Error::InvalidArgument(format!(
                        "point {:?} at ({}, {}) m lies outside the image",
                        t.name, t.x_m, t.z_m
                    )));
                };
                let peak = metrics::find_peak_near(env, center, self.search_px);
                let mut notes = Vec::new();
                let mut width = |axis| match metrics::fwhm(env, peak, axis) {
                    Ok(w) => Some(w),
                    Err(e) => {
                        notes.push(format!("{axis:?}: {e}"));
                        None
                    }
                };
                let axial_fwhm_m = width(Axis::Axial);
                let lateral_fwhm_m = width(Axis::Lateral);
                Ok(PointResult {
                    name: t.name.clone(),
                    peak: [peak.0, peak.1],
                    axial_fwhm_m,
                    lateral_fwhm_m,
                    note: (!notes.is_empty()).then(|| notes.join("; ")),
                })
            })
            .collect()
    }

    pub fn contrast(&self, env: &ImageVec, pairs: &[ContrastPair]) -> Result<Vec<ContrastResult>> {
        let g = env.grid();
        pairs
            .iter()
            .map(|p| {
                let a = Roi::from_shape(g, &p.target)?;
                let b = Roi::from_shape(g, &p.background)?;
                Ok(ContrastResult {
                    name: p.name.clone(),
                    cnr_db: metrics::cnr_in(env, &a, &b, self.domain, self.dynamic_range_db)?,
                    gcnr: metrics::gcnr(env, &a, &b, self.bins)?,
                })
            })
            .collect()
    }
}

pub(crate) fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn mm(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |w| format!("{:.4}", w * 1e3))
}

fn db(v: f64) -> String {
    if v == f64::MIN {
        "-inf".into()
    } else {
        format!("{v:.3}")
    }
}

pub(crate) fn metrics_table(r: &MetricsReport) -> String {
    let mut s = String::new();
    if !r.points.is_empty() {
        s += &format!("{:<16} {:>6} {:>6} {:>14} {:>16}\n", "point", "i", "j", "axial FWHM mm", "lateral FWHM mm");
        for p in &r.points {
            s += &format!(
                "{:<16} {:>6} {:>6} {:>14} {:>16}\n",
                p.name, p.peak[0], p.peak[1], mm(p.axial_fwhm_m), mm(p.lateral_fwhm_m)
            );
        }
    }
    if !r.contrast.is_empty() {
        s += &format!("{:<16} {:>10} {:>8}\n", "region", "CNR dB", "gCNR");
        for c in &r.contrast {
            s += &format!("{:<16} {:>10} {:>8.4}\n", c.name, db(c.cnr_db), c.gcnr);
        }
    }
    s
}

pub(crate) fn compare_table(r: &CompareReport) -> String {
    let mut s = format!(
        "{:<10} {:>14} {:>16} {:>16}\n",
        "method", "axial FWHM mm", "lateral FWHM mm", "max sidelobe dB"
    );
    for m in &r.methods {
        s += &format!(
            "{:<10} {:>14} {:>16} {:>16}\n",
            m.method,
            mm(m.mean_axial_fwhm_m),
            mm(m.mean_lateral_fwhm_m),
            m.max_sidelobe_db.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
        );
    }
    let names: Vec<&str> = r
        .methods
        .first()
        .map(|m| m.contrast.iter().map(|c| c.name.as_str()).collect())
        .unwrap_or_default();
    for (k, name) in names.iter().enumerate() {
        s += &format!("\n{:<10} {:>10} {:>8}   ({name})\n", "method", "CNR dB", "gCNR");
        for m in &r.methods {
            let c = &m.contrast[k];
            s += &format!("{:<10} {:>10} {:>8.4}\n", m.method, db(c.cnr_db), c.gcnr);
        }
    }
    s
}
