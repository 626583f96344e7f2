use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::edm::{DEFAULT_RHO, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_STEPS};

#[derive(Debug, Parser)]
#[command(
    name = "echopw",
    version,
    about = "Plane-wave ultrasound simulation, beamforming and diffusion-prior reconstruction",
    after_help = "Set ECHOPW_THREADS=<n> to cap worker threads (0 = all cores)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate multi-angle RF channel data from a scene description
    Simulate(SimulateArgs),
    /// Build the sparse measurement operator for one steering angle
    BuildMatrix(BuildMatrixArgs),
    /// Delay-and-sum beamforming, single angle or coherently compounded
    Das(DasArgs),
    /// Diffusion-prior reconstruction from a single plane wave with data-consistency guidance
    Reconstruct(ReconstructArgs),
    /// Envelope detection and log compression to an 8-bit PGM
    Bmode(BmodeArgs),
    /// FWHM, CNR and gCNR measurements on an image
    Metrics(MetricsArgs),
    /// Compare single-angle DAS, compounded DAS and guided reconstruction on one scene
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene description (JSON)
    #[arg(long)]
    pub scene: PathBuf,
    /// Acquisition geometry (JSON)
    #[arg(long)]
    pub acq: PathBuf,
    /// Standard deviation of additive channel noise, in RF amplitude units
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    /// Noise seed (unitless integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output RF file (PWRF)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Linear,
    Nearest,
}

#[derive(Debug, Args)]
pub struct BuildMatrixArgs {
    /// Acquisition geometry (JSON)
    #[arg(long)]
    pub acq: PathBuf,
    /// Steering angle in degrees
    #[arg(long, allow_negative_numbers = true)]
    pub angle_deg: f64,
    /// Fractional-delay interpolation
    #[arg(long, value_enum, default_value_t = InterpArg::Linear)]
    pub interp: InterpArg,
    /// Output operator file (PWH1)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DasArgs {
    /// RF file (PWRF)
    #[arg(long)]
    pub rf: PathBuf,
    /// Acquisition geometry (JSON)
    #[arg(long)]
    pub acq: PathBuf,
    /// `all` to compound every frame, or a zero-based frame index
    #[arg(long, default_value = "all")]
    pub angles: String,
    /// Receive f-number (dimensionless); omit for the full aperture
    #[arg(long)]
    pub f_number: Option<f64>,
    /// Output image (TNSR with .json grid sidecar)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Gaussian,
    Gmm,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResidualArg {
    Norm,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegArg {
    None,
    Tv,
}

/// Sampler, prior and guidance settings shared by `reconstruct` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Number of Heun steps
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Smallest noise level, in image amplitude units
    #[arg(long, default_value_t = DEFAULT_SIGMA_MIN)]
    pub sigma_min: f64,
    /// Largest noise level, in image amplitude units
    #[arg(long, default_value_t = DEFAULT_SIGMA_MAX)]
    pub sigma_max: f64,
    /// Schedule curvature exponent (dimensionless)
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,
    /// Denoiser
    #[arg(long, value_enum, default_value_t = PriorArg::Gaussian)]
    pub prior: PriorArg,
    /// Gaussian prior mean, in image amplitude units
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub prior_mean: f64,
    /// Gaussian prior variance, in squared image amplitude units
    #[arg(long, default_value_t = 1.0)]
    pub prior_var: f64,
    /// Mixture components as `weight:mean:variance` (weights sum to 1; mean and
    /// variance in image amplitude units), comma separated
    #[arg(long, default_value = "0.5:-1:0.25,0.5:1:0.25", allow_hyphen_values = true)]
    pub gmm: String,
    /// External denoiser command line (program and arguments, whitespace separated)
    #[arg(long)]
    pub denoiser_cmd: Option<String>,
    /// External denoiser timeout per request, in seconds
    #[arg(long, default_value_t = 60.0)]
    pub denoiser_timeout_s: f64,
    /// Peak guidance weight (step size, image units per gradient unit); 0 disables guidance
    #[arg(long, default_value_t = crate::guidance::DEFAULT_LAMBDA_MAX)]
    pub lambda_max: f64,
    /// Guidance weight floor, same units as --lambda-max
    #[arg(long, default_value_t = 0.0)]
    pub lambda_min: f64,
    /// Regularizer scale (dimensionless)
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Residual term: norm = ||Hx - y||, squared = 0.5 ||Hx - y||^2
    #[arg(long, value_enum, default_value_t = ResidualArg::Norm)]
    pub residual: ResidualArg,
    /// Regularizer
    #[arg(long, value_enum, default_value_t = RegArg::None)]
    pub reg: RegArg,
    /// Total-variation smoothing, in image amplitude units
    #[arg(long, default_value_t = crate::guidance::DEFAULT_TV_EPSILON)]
    pub tv_epsilon: f64,
    /// Initial-noise seed (unitless integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// RF file (PWRF)
    #[arg(long)]
    pub rf: PathBuf,
    /// Acquisition geometry (JSON)
    #[arg(long)]
    pub acq: PathBuf,
    /// Zero-based frame index in the RF file; defaults to the centre angle
    #[arg(long)]
    pub angle_index: Option<usize>,
    /// Precomputed operator (PWH1) for that angle; built on the fly if omitted
    #[arg(long)]
    pub operator: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output image (TNSR with .json grid sidecar)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BmodeArgs {
    /// Input image (TNSR)
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Dynamic range in dB
    #[arg(long, default_value_t = crate::metrics::DEFAULT_DYNAMIC_RANGE_DB)]
    pub dr: f64,
    /// Treat the input as an envelope and skip envelope detection
    #[arg(long)]
    pub envelope: bool,
    /// Output image (binary PGM)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CnrDomainArg {
    Envelope,
    Log,
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    /// Histogram bins for gCNR
    #[arg(long, default_value_t = crate::metrics::DEFAULT_GCNR_BINS)]
    pub bins: usize,
    /// Data CNR is computed on
    #[arg(long, value_enum, default_value_t = CnrDomainArg::Envelope)]
    pub cnr_domain: CnrDomainArg,
    /// Dynamic range in dB for log-domain CNR
    #[arg(long, default_value_t = crate::metrics::DEFAULT_DYNAMIC_RANGE_DB)]
    pub dr: f64,
    /// Peak search radius around each listed point, in pixels
    #[arg(long, default_value_t = 3)]
    pub search_px: usize,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Input image (TNSR)
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Treat the input as an envelope and skip envelope detection
    #[arg(long)]
    pub envelope: bool,
    /// Points and ROI pairs (JSON, positions in metres)
    #[arg(long)]
    pub rois: PathBuf,
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// Output report (JSON)
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scene description (JSON)
    #[arg(long)]
    pub scene: PathBuf,
    /// Acquisition geometry (JSON)
    #[arg(long)]
    pub acq: PathBuf,
    /// Standard deviation of additive channel noise, in RF amplitude units
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    /// Noise seed (unitless integer)
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    /// Zero-based frame index for the single-angle methods; defaults to the centre angle
    #[arg(long)]
    pub angle_index: Option<usize>,
    /// Optional ROI pairs (JSON); points default to the scene's point targets
    #[arg(long)]
    pub rois: Option<PathBuf>,
    /// Exclusion radius around each point target for the sidelobe level, in pixels
    #[arg(long, default_value_t = 3)]
    pub sidelobe_radius_px: usize,
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Directory to also write each method's image (TNSR) into
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output report (JSON)
    #[arg(long)]
    pub report: PathBuf,
}
