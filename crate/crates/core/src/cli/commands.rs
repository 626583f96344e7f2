use std::path::Path;
use std::time::Duration;

use super::args::*;
use super::report::{
    compare_table, mean, metrics_table, CompareReport, Measure, MethodReport, MetricsReport,
    PointTarget, Provenance, RoiDocument,
};
use crate::das::{das_compound_with, das_single_with, DasOptions};
use crate::data::{ImageVec, RfFrame};
use crate::edm::{
    heun_sample_traced, sigma_schedule, Denoiser, ExternalDenoiser, GaussianPrior, GmmPrior,
    SamplerConfig, StepRecord,
};
use crate::error::{Error, Result};
use crate::geometry::{AcquisitionConfig, ImagingGrid};
use crate::guidance::{GuidanceConfig, Regularizer, ResidualMode};
use crate::io::{self, RfDataset};
use crate::metrics::{self, CnrDomain};
use crate::operator::{build_measurement_matrix, build_measurement_matrix_with, Interpolation, SparseOperator};
use crate::phantom::{simulate_rf, NoiseModel, Primitive, Scene, SceneDescription};

pub(super) fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::BuildMatrix(a) => build_matrix(a),
        Command::Das(a) => das(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Bmode(a) => bmode(a),
        Command::Metrics(a) => measure(a),
        Command::Compare(a) => compare(a),
    }
}

fn load_rf(path: &Path, acq: &AcquisitionConfig) -> Result<RfDataset> {
    let ds = io::read_rf(path)?;
    ds.check_acquisition(acq).map_err(|_| {
        Error::Config(format!(
            "{}: recorded with a different acquisition geometry",
            path.display()
        ))
    })?;
    Ok(ds)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn flag_err(flag: &str, e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{flag}: {m}")),
        Error::Config(m) => Error::Config(format!("{flag}: {m}")),
        other => other,
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let acq = AcquisitionConfig::load(&a.acq)?;
    let desc = SceneDescription::load(&a.scene)?;
    let scene = Scene::from_description(acq.grid(), desc).map_err(|e| flag_err("--scene", e))?;
    let noise = NoiseModel {
        std: a.noise_std,
        seed: a.seed,
    };
    let frames = simulate_rf(&scene, &acq, &noise).map_err(|e| flag_err("--noise-std", e))?;
    let n = frames.len();
    io::write_rf(&a.out, &RfDataset::new(&acq, frames)?)?;
    println!("wrote {n} frames to {}", a.out.display());
    Ok(())
}

fn build_matrix(a: BuildMatrixArgs) -> Result<()> {
    let acq = AcquisitionConfig::load(&a.acq)?;
    let interp = match a.interp {
        InterpArg::Linear => Interpolation::Linear,
        InterpArg::Nearest => Interpolation::Nearest,
    };
    let op = build_measurement_matrix_with(&acq, a.angle_deg.to_radians(), interp)
        .map_err(|e| flag_err("--angle-deg", e))?;
    io::write_operator(&a.out, &op)?;
    println!(
        "{} x {} operator, {} nonzeros, written to {}",
        op.rows(),
        op.cols(),
        op.nnz(),
        a.out.display()
    );
    Ok(())
}

fn das(a: DasArgs) -> Result<()> {
    let acq = AcquisitionConfig::load(&a.acq)?;
    let ds = load_rf(&a.rf, &acq)?;
    let opts = DasOptions {
        f_number: a.f_number,
        ..Default::default()
    };
    let img = if a.angles == "all" {
        das_compound_with(&ds.frames, &acq, opts).map_err(|e| flag_err("--rf", e))?
    } else {
        let idx: usize = a.angles.parse().map_err(|_| {
            Error::InvalidArgument(format!("--angles: expected `all` or an index, got {:?}", a.angles))
        })?;
        let frame = ds.frame(idx).map_err(|e| flag_err("--angles", e))?;
        das_single_with(frame, &acq, frame.angle, opts).map_err(|e| flag_err("--f-number", e))?
    };
    io::write_tensor(&a.out, &img)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn parse_gmm(spec: &str) -> Result<Vec<(f64, f32, f32)>> {
    spec.split(',')
        .map(|part| {
            let f: Vec<&str> = part.trim().split(':').collect();
            let bad = || Error::InvalidArgument(format!("--gmm: cannot parse component {part:?}"));
            if f.len() != 3 {
                return Err(bad());
            }
            Ok((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn make_denoiser(s: &SamplerArgs, grid: &ImagingGrid) -> Result<Box<dyn Denoiser>> {
    Ok(match s.prior {
        PriorArg::Gaussian => Box::new(
            GaussianPrior::isotropic(grid, s.prior_mean as f32, s.prior_var as f32)
                .map_err(|e| flag_err("--prior-var", e))?,
        ),
        PriorArg::Gmm => Box::new(
            GmmPrior::isotropic(grid, &parse_gmm(&s.gmm)?).map_err(|e| flag_err("--gmm", e))?,
        ),
        PriorArg::External => {
            let cmd = s.denoiser_cmd.as_deref().ok_or_else(|| {
                Error::InvalidArgument("--prior external requires --denoiser-cmd".into())
            })?;
            if !(s.denoiser_timeout_s > 0.0 && s.denoiser_timeout_s.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "--denoiser-timeout-s must be positive, got {}",
                    s.denoiser_timeout_s
                )));
            }
            let timeout = Duration::from_secs_f64(s.denoiser_timeout_s);
            Box::new(ExternalDenoiser::from_command_line(cmd, timeout).map_err(|e| flag_err("--denoiser-cmd", e))?)
        }
    })
}

/// Guided sampling from one RF frame.
fn run_edm(
    s: &SamplerArgs,
    acq: &AcquisitionConfig,
    frame: &RfFrame,
    op: &SparseOperator,
) -> Result<(ImageVec, Vec<StepRecord>)> {
    let schedule = sigma_schedule(s.steps, s.sigma_min, s.sigma_max, s.rho)
        .map_err(|e| flag_err("--steps/--sigma-min/--sigma-max/--rho", e))?;
    let denoiser = make_denoiser(s, acq.grid())?;
    let guidance = (s.lambda_max != 0.0 || s.lambda_min != 0.0).then(|| GuidanceConfig {
        lambda_max: s.lambda_max,
        lambda_min: s.lambda_min,
        alpha: s.alpha,
        residual_mode: match s.residual {
            ResidualArg::Norm => ResidualMode::Norm,
            ResidualArg::Squared => ResidualMode::Squared,
        },
        regularizer: match s.reg {
            RegArg::None => Regularizer::None,
            RegArg::Tv => Regularizer::TotalVariation,
        },
        tv_epsilon: s.tv_epsilon,
        ..GuidanceConfig::new(op, frame)
    });
    if let Some(g) = &guidance {
        g.validate().map_err(|e| flag_err("--lambda-max/--lambda-min/--alpha/--tv-epsilon", e))?;
    }
    let cfg = SamplerConfig {
        schedule,
        seed: s.seed,
        guidance,
    };
    heun_sample_traced(denoiser.as_ref(), &cfg, acq.grid())
}

fn single_index(acq: &AcquisitionConfig, ds_len: usize, requested: Option<usize>) -> Result<usize> {
    let idx = requested.unwrap_or_else(|| acq.sequence().center_index());
    if idx >= ds_len {
        return Err(Error::InvalidArgument(format!(
            "--angle-index {idx} out of range for {ds_len} frames"
        )));
    }
    Ok(idx)
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let acq = AcquisitionConfig::load(&a.acq)?;
    let ds = load_rf(&a.rf, &acq)?;
    let idx = single_index(&acq, ds.frames.len(), a.angle_index)?;
    let frame = &ds.frames[idx];
    let op = match &a.operator {
        Some(p) => {
            let op = io::read_operator(p, &acq)?;
            if op.angle().to_bits() != frame.angle.to_bits() {
                return Err(Error::Config(format!(
                    "{}: operator angle {} rad does not match frame {idx} angle {} rad",
                    p.display(),
                    op.angle(),
                    frame.angle
                )));
            }
            op
        }
        None => build_measurement_matrix(&acq, frame.angle)?,
    };
    let (img, records) = run_edm(&a.sampler, &acq, frame, &op)?;
    io::write_tensor(&a.out, &img)?;
    let pred = op.apply_forward(&img)?;
    let residual: f64 = pred
        .data()
        .iter()
        .zip(frame.data())
        .map(|(p, q)| (*p as f64 - *q as f64).powi(2))
        .sum();
    println!(
        "{} steps, final residual {:.6e}, wrote {}",
        records.len(),
        residual.sqrt(),
        a.out.display()
    );
    Ok(())
}

fn envelope_of(img: &ImageVec, already: bool) -> Result<ImageVec> {
    if already {
        Ok(img.clone())
    } else {
        metrics::envelope(img)
    }
}

fn bmode(a: BmodeArgs) -> Result<()> {
    let img = io::read_tensor(&a.input)?;
    let env = envelope_of(&img, a.envelope)?;
    let b = metrics::bmode(&env, a.dr).map_err(|e| match e {
        Error::DegenerateInput(m) => Error::DegenerateInput(format!("{}: {m}", a.input.display())),
        other => flag_err("--dr", other),
    })?;
    io::export_pgm(&b, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn measure_settings(m: &MeasureArgs) -> Result<Measure> {
    if m.bins < 2 {
        return Err(Error::InvalidArgument(format!("--bins must be >= 2, got {}", m.bins)));
    }
    Ok(Measure {
        bins: m.bins,
        domain: match m.cnr_domain {
            CnrDomainArg::Envelope => CnrDomain::Envelope,
            CnrDomainArg::Log => CnrDomain::LogCompressed,
        },
        dynamic_range_db: m.dr,
        search_px: m.search_px,
    })
}

fn load_rois(path: &Path) -> Result<RoiDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn measure(a: MetricsArgs) -> Result<()> {
    let img = io::read_tensor(&a.input)?;
    let env = envelope_of(&img, a.envelope)?;
    let doc = load_rois(&a.rois)?;
    let m = measure_settings(&a.measure)?;
    let report = MetricsReport {
        grid: env.grid().clone(),
        settings: m.settings(),
        points: m.points(&env, &doc.points).map_err(|e| flag_err("--rois", e))?,
        contrast: m.contrast(&env, &doc.contrast).map_err(|e| flag_err("--rois", e))?,
    };
    write_json(&a.report, &report)?;
    print!("{}", metrics_table(&report));
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn compare(a: CompareArgs) -> Result<()> {
    let acq = AcquisitionConfig::load(&a.acq)?;
    let desc = SceneDescription::load(&a.scene)?;
    let scene = Scene::from_description(acq.grid(), desc.clone()).map_err(|e| flag_err("--scene", e))?;
    let noise = NoiseModel {
        std: a.noise_std,
        seed: a.noise_seed,
    };
    let frames = simulate_rf(&scene, &acq, &noise).map_err(|e| flag_err("--noise-std", e))?;
    let idx = single_index(&acq, frames.len(), a.angle_index)?;
    let frame = &frames[idx];
    let op = build_measurement_matrix(&acq, frame.angle)?;

    let doc = match &a.rois {
        Some(p) => load_rois(p)?,
        None => RoiDocument::default(),
    };
    let targets: Vec<PointTarget> = if doc.points.is_empty() {
        desc.primitives
            .iter()
            .filter_map(|p| match *p {
                Primitive::Point { x_m, z_m, .. } => Some((x_m, z_m)),
                _ => None,
            })
            .enumerate()
            .map(|(k, (x_m, z_m))| PointTarget {
                name: format!("p{k}"),
                x_m,
                z_m,
            })
            .collect()
    } else {
        doc.points.clone()
    };
    let m = measure_settings(&a.measure)?;

    let images = [
        ("das_1pw", das_single_with(frame, &acq, frame.angle, DasOptions::default())?),
        ("das_all", das_compound_with(&frames, &acq, DasOptions::default())?),
        ("edm_1pw", run_edm(&a.sampler, &acq, frame, &op)?.0),
    ];
    if let Some(dir) = &a.images {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, img) in &images {
            io::write_tensor(&dir.join(format!("{name}.tnsr")), img)?;
        }
    }

    let mut methods = Vec::new();
    for (name, img) in &images {
        let env = metrics::envelope(img)?;
        let points = m.points(&env, &targets).map_err(|e| flag_err("--scene", e))?;
        let peaks: Vec<(usize, usize)> = points.iter().map(|p| (p.peak[0], p.peak[1])).collect();
        let max_sidelobe_db = if peaks.is_empty() {
            None
        } else {
            Some(metrics::max_sidelobe_db(&env, &peaks, a.sidelobe_radius_px)?)
        };
        methods.push(MethodReport {
            method: (*name).into(),
            mean_axial_fwhm_m: mean(points.iter().map(|p| p.axial_fwhm_m)),
            mean_lateral_fwhm_m: mean(points.iter().map(|p| p.lateral_fwhm_m)),
            max_sidelobe_db,
            contrast: m.contrast(&env, &doc.contrast).map_err(|e| flag_err("--rois", e))?,
            points,
        });
    }

    let seq = acq.sequence();
    let s = &a.sampler;
    let report = CompareReport {
        provenance: Provenance {
            num_angles: seq.len(),
            angle_min_deg: seq.angles_deg.iter().copied().fold(f64::INFINITY, f64::min),
            angle_max_deg: seq.angles_deg.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            single_angle_index: idx,
            single_angle_deg: seq.angles_deg[idx],
            noise_std: a.noise_std,
            noise_seed: a.noise_seed,
            steps: s.steps,
            sigma_min: s.sigma_min,
            sigma_max: s.sigma_max,
            rho: s.rho,
            prior: format!("{:?}", s.prior).to_lowercase(),
            lambda_max: s.lambda_max,
            lambda_min: s.lambda_min,
            alpha: s.alpha,
            residual: format!("{:?}", s.residual).to_lowercase(),
            regularizer: format!("{:?}", s.reg).to_lowercase(),
            seed: s.seed,
            sidelobe_radius_px: a.sidelobe_radius_px,
            acquisition_fingerprint: hex(&acq.fingerprint()),
        },
        settings: m.settings(),
        methods,
    };
    write_json(&a.report, &report)?;
    print!("{}", compare_table(&report));
    Ok(())
}
