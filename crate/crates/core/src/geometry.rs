//! Transducer, imaging grid and plane-wave sequence geometry, plus the
//! transmit/receive time-of-flight model shared by the measurement operator
//! and the delay-and-sum beamformer.
//!
//! Coordinates are `(x, z)` in meters: `x` lateral with the array centered at
//! zero, `z` depth. All geometry is evaluated in double precision.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// 256-bit digest binding data files to the geometry that produced them.
pub type Fingerprint = [u8; 32];

pub const DEFAULT_SOUND_SPEED: f64 = 1540.0;
pub const DEFAULT_NUM_ELEMENTS: usize = 128;
pub const DEFAULT_SAMPLING_RATE: f64 = 25e6;
pub const DEFAULT_NUM_SAMPLES: usize = 1300;
pub const DEFAULT_PITCH: f64 = 0.0003;
pub const DEFAULT_NUM_AXIAL: usize = 1000;
pub const DEFAULT_NUM_LATERAL: usize = 256;
pub const DEFAULT_NUM_ANGLES: usize = 75;
pub const DEFAULT_MAX_ANGLE_DEG: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransducerConfig {
    pub num_elements: usize,
    #[serde(rename = "pitch_m")]
    pub pitch: f64,
    #[serde(rename = "sampling_rate_hz")]
    pub sampling_rate: f64,
    pub num_samples: usize,
    #[serde(rename = "sound_speed_m_s", default = "default_sound_speed")]
    pub sound_speed: f64,
    #[serde(rename = "t0_offset_s", default)]
    pub t0_offset: f64,
}

fn default_sound_speed() -> f64 {
    DEFAULT_SOUND_SPEED
}

impl Default for TransducerConfig {
    fn default() -> Self {
        Self {
            num_elements: DEFAULT_NUM_ELEMENTS,
            pitch: DEFAULT_PITCH,
            sampling_rate: DEFAULT_SAMPLING_RATE,
            num_samples: DEFAULT_NUM_SAMPLES,
            sound_speed: DEFAULT_SOUND_SPEED,
            t0_offset: 0.0,
        }
    }
}

impl TransducerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_elements < 2 {
            return Err(Error::Config(format!(
                "num_elements must be >= 2, got {}",
                self.num_elements
            )));
        }
        positive("pitch_m", self.pitch)?;
        positive("sampling_rate_hz", self.sampling_rate)?;
        positive("sound_speed_m_s", self.sound_speed)?;
        if self.num_samples < 1 {
            return Err(Error::Config("num_samples must be >= 1".into()));
        }
        if !self.t0_offset.is_finite() {
            return Err(Error::Config("t0_offset_s must be finite".into()));
        }
        Ok(())
    }

    /// Lateral position of element `k`; the array is centered at x = 0.
    #[inline]
    pub fn element_x(&self, k: usize) -> f64 {
        (k as f64 - (self.num_elements as f64 - 1.0) / 2.0) * self.pitch
    }

    pub fn aperture(&self) -> f64 {
        (self.num_elements as f64 - 1.0) * self.pitch
    }

    /// Number of RF samples in one frame, `N_c * N_s`.
    pub fn frame_len(&self) -> usize {
        self.num_elements * self.num_samples
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingGrid {
    pub num_axial: usize,
    pub num_lateral: usize,
    #[serde(rename = "dz_m")]
    pub dz: f64,
    #[serde(rename = "dx_m")]
    pub dx: f64,
    #[serde(rename = "z0_m", default)]
    pub z0: f64,
}

impl ImagingGrid {
    /// Grid whose lateral spacing equals the pitch and whose depth spans the
    /// acquisition window `c * N_s / (2 f_s)`.
    pub fn for_transducer(t: &TransducerConfig, num_axial: usize, num_lateral: usize) -> Self {
        let depth = t.sound_speed * t.num_samples as f64 / (2.0 * t.sampling_rate);
        Self {
            num_axial,
            num_lateral,
            dz: depth / num_axial as f64,
            dx: t.pitch,
            z0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_axial < 1 || self.num_lateral < 1 {
            return Err(Error::Config(format!(
                "grid must have at least one pixel, got {}x{}",
                self.num_axial, self.num_lateral
            )));
        }
        positive("dz_m", self.dz)?;
        positive("dx_m", self.dx)?;
        if !(self.z0 >= 0.0 && self.z0.is_finite()) {
            return Err(Error::Config(format!("z0_m must be >= 0, got {}", self.z0)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.num_axial * self.num_lateral
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn lateral(&self, j: usize) -> f64 {
        (j as f64 - (self.num_lateral as f64 - 1.0) / 2.0) * self.dx
    }

    #[inline]
    pub fn axial(&self, i: usize) -> f64 {
        self.z0 + i as f64 * self.dz
    }

    /// Physical `(x, z)` of pixel `(i, j)`.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        (self.lateral(j), self.axial(i))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.num_lateral + j
    }

    /// Nearest pixel to a physical position, or `None` when the position lies
    /// more than half a cell outside the grid.
    pub fn nearest_pixel(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        let jf = x / self.dx + (self.num_lateral as f64 - 1.0) / 2.0;
        let i_f = (z - self.z0) / self.dz;
        let (i, j) = (i_f.round(), jf.round());
        if !(i >= 0.0 && j >= 0.0) {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        (i < self.num_axial && j < self.num_lateral).then_some((i, j))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSequence {
    /// Steering angles in degrees. Degrees are the stored form so that JSON
    /// round trips reproduce the fingerprint exactly.
    pub angles_deg: Vec<f64>,
}

impl Default for PlaneWaveSequence {
    fn default() -> Self {
        Self::uniform(DEFAULT_NUM_ANGLES, DEFAULT_MAX_ANGLE_DEG)
    }
}

impl PlaneWaveSequence {
    /// `count` angles uniformly spaced over `[-max_deg, max_deg]` inclusive.
    pub fn uniform(count: usize, max_deg: f64) -> Self {
        let angles_deg = match count {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..count)
                .map(|i| -max_deg + 2.0 * max_deg * i as f64 / (count - 1) as f64)
                .collect(),
        };
        Self { angles_deg }
    }

    pub fn single(angle_deg: f64) -> Self {
        Self {
            angles_deg: vec![angle_deg],
        }
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    pub fn angle(&self, index: usize) -> f64 {
        self.angles_deg[index].to_radians()
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        self.angles_deg.iter().map(|a| a.to_radians())
    }

    /// Index of the angle closest to broadside.
    pub fn center_index(&self) -> usize {
        self.angles_deg
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles_deg.is_empty() {
            return Err(Error::Config("plane-wave sequence has no angles".into()));
        }
        for &a in &self.angles_deg {
            check_angle(a.to_radians()).map_err(|_| {
                Error::Config(format!("steering angle {a} deg outside (-90, 90)"))
            })?;
        }
        Ok(())
    }
}

/// Transducer, grid and transmit sequence, validated as a unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcquisitionConfig {
    transducer: TransducerConfig,
    grid: ImagingGrid,
    sequence: PlaneWaveSequence,
}

impl AcquisitionConfig {
    pub fn new(
        transducer: TransducerConfig,
        grid: ImagingGrid,
        sequence: PlaneWaveSequence,
    ) -> Result<Self> {
        transducer.validate()?;
        grid.validate()?;
        sequence.validate()?;
        Ok(Self {
            transducer,
            grid,
            sequence,
        })
    }

    /// 128 elements, 25 MHz, 1300 samples, 1000x256 grid, 75 angles over +-16 deg.
    pub fn standard_linear_array() -> Self {
        let t = TransducerConfig::default();
        let grid = ImagingGrid::for_transducer(&t, DEFAULT_NUM_AXIAL, DEFAULT_NUM_LATERAL);
        Self::new(t, grid, PlaneWaveSequence::default()).expect("default geometry is valid")
    }

    pub fn transducer(&self) -> &TransducerConfig {
        &self.transducer
    }

    pub fn grid(&self) -> &ImagingGrid {
        &self.grid
    }

    pub fn sequence(&self) -> &PlaneWaveSequence {
        &self.sequence
    }

    /// Same transducer and grid with a different transmit sequence.
    pub fn with_sequence(&self, sequence: PlaneWaveSequence) -> Result<Self> {
        Self::new(self.transducer.clone(), self.grid.clone(), sequence)
    }

    /// Canonical JSON: every field explicit, fixed key order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("geometry serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }

    /// SHA-256 of the canonical JSON.
    pub fn fingerprint(&self) -> Fingerprint {
        Sha256::digest(self.to_canonical_json().as_bytes()).into()
    }

    /// Parses a JSON document. Grid spacing, grid counts and the sequence
    /// may be omitted and are then derived from the transducer defaults.
    pub fn from_json_str(text: &str) -> std::result::Result<Self, JsonConfigError> {
        let file: AcquisitionFile = serde_json::from_str(text)?;
        Ok(file.resolve()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            JsonConfigError::Json(source) => Error::Json {
                path: path.to_path_buf(),
                source,
            },
            JsonConfigError::Invalid(err) => {
                Error::Config(format!("{}: {}", path.display(), err))
            }
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_pretty()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JsonConfigError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] Error),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AcquisitionFile {
    transducer: TransducerConfig,
    #[serde(default)]
    grid: GridFile,
    #[serde(default)]
    sequence: Option<PlaneWaveSequence>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    num_axial: Option<usize>,
    num_lateral: Option<usize>,
    dz_m: Option<f64>,
    dx_m: Option<f64>,
    z0_m: Option<f64>,
}

impl AcquisitionFile {
    fn resolve(self) -> Result<AcquisitionConfig> {
        self.transducer.validate()?;
        let g = self.grid;
        let mut grid = ImagingGrid::for_transducer(
            &self.transducer,
            g.num_axial.unwrap_or(DEFAULT_NUM_AXIAL),
            g.num_lateral.unwrap_or(DEFAULT_NUM_LATERAL),
        );
        if let Some(dz) = g.dz_m {
            grid.dz = dz;
        }
        if let Some(dx) = g.dx_m {
            grid.dx = dx;
        }
        if let Some(z0) = g.z0_m {
            grid.z0 = z0;
        }
        AcquisitionConfig::new(self.transducer, grid, self.sequence.unwrap_or_default())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn check_angle(angle: f64) -> Result<()> {
    if angle.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "steering angle {angle} rad outside (-pi/2, pi/2)"
        )))
    }
}

fn check_depth(z: f64) -> Result<()> {
    if z >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("pixel depth {z} m is negative")))
    }
}

/// Transmit time of flight from the plane-wave origin to `(x, z)`.
///
/// The `A/(2c) |sin θ|` term aligns the wavefront so that the first-fired
/// edge element emits at t = 0.
pub fn tx_delay(angle: f64, pixel: (f64, f64), transducer: &TransducerConfig) -> Result<f64> {
    check_angle(angle)?;
    check_depth(pixel.1)?;
    Ok(DelayModel::new(transducer, angle).tx(pixel.0, pixel.1))
}

/// Receive time of flight from `(x, z)` back to an element at `element_x`.
pub fn rx_delay(pixel: (f64, f64), element_x: f64, sound_speed: f64) -> Result<f64> {
    check_depth(pixel.1)?;
    if !(sound_speed > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sound speed must be positive, got {sound_speed}"
        )));
    }
    Ok((pixel.0 - element_x).hypot(pixel.1) / sound_speed)
}

/// Fractional RF sample index of a round-trip delay. Range checking is the
/// caller's job.
pub fn sample_index(total_delay: f64, transducer: &TransducerConfig) -> Result<f64> {
    if !(total_delay >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total delay {total_delay} s is negative"
        )));
    }
    Ok((total_delay - transducer.t0_offset) * transducer.sampling_rate)
}

/// Precomputed per-angle delay terms for the inner loops. Inputs are assumed
/// validated.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DelayModel {
    sin: f64,
    cos: f64,
    align: f64,
    inv_c: f64,
    t0: f64,
    fs: f64,
}

impl DelayModel {
    pub(crate) fn new(t: &TransducerConfig, angle: f64) -> Self {
        let (sin, cos) = angle.sin_cos();
        Self {
            sin,
            cos,
            align: t.aperture() / (2.0 * t.sound_speed) * sin.abs(),
            inv_c: 1.0 / t.sound_speed,
            t0: t.t0_offset,
            fs: t.sampling_rate,
        }
    }

    #[inline]
    pub(crate) fn tx(&self, x: f64, z: f64) -> f64 {
        (x * self.sin + z * self.cos) * self.inv_c + self.align
    }

    #[inline]
    pub(crate) fn rx(&self, x: f64, z: f64, element_x: f64) -> f64 {
        (x - element_x).hypot(z) * self.inv_c
    }

    #[inline]
    pub(crate) fn sample(&self, delay: f64) -> f64 {
        (delay - self.t0) * self.fs
    }
}
