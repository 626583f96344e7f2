//! Synthetic reflectivity scenes and RF simulation `y = H x + z`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ImageVec, RfFrame};
use crate::error::{Error, Result};
use crate::geometry::{AcquisitionConfig, ImagingGrid};
use crate::operator::build_measurement_matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Placed at the nearest pixel; amplitudes of coincident points add.
    Point { x_m: f64, z_m: f64, amplitude: f64 },
    /// Multiplies the reflectivity inside the disc by `gain` (0 = anechoic).
    Disc {
        center_x_m: f64,
        center_z_m: f64,
        radius_m: f64,
        gain: f64,
    },
    /// I.i.d. Gaussian background drawn in row-major order.
    Speckle { std: f64, seed: u64 },
}

/// Ordered list of primitives. Speckle layers are drawn first, then discs
/// applied, then points added, regardless of listing order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub primitives: Vec<Primitive>,
}

impl SceneDescription {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("scene serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Pixel indices of all point primitives.
    pub fn point_pixels(&self, grid: &ImagingGrid) -> Result<Vec<(usize, usize)>> {
        self.primitives
            .iter()
            .filter_map(|p| match *p {
                Primitive::Point { x_m, z_m, .. } => Some(locate(grid, x_m, z_m)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub reflectivity: ImageVec,
    pub description: SceneDescription,
}

impl Scene {
    /// Regenerates the reflectivity deterministically from the description.
    pub fn from_description(grid: &ImagingGrid, description: SceneDescription) -> Result<Self> {
        let mut data = vec![0f32; grid.len()];
        for prim in &description.primitives {
            if let Primitive::Speckle { std, seed } = *prim {
                if !(std >= 0.0 && std.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "speckle std must be >= 0, got {std}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for v in data.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *v += (std * n) as f32;
                }
            }
        }
        for prim in &description.primitives {
            if let Primitive::Disc {
                center_x_m,
                center_z_m,
                radius_m,
                gain,
            } = *prim
            {
                if !(radius_m >= 0.0) || !gain.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "disc needs radius >= 0 and finite gain, got r={radius_m}, gain={gain}"
                    )));
                }
                let r2 = radius_m * radius_m;
                for i in 0..grid.num_axial {
                    for j in 0..grid.num_lateral {
                        let (x, z) = grid.position(i, j);
                        let d2 = (x - center_x_m).powi(2) + (z - center_z_m).powi(2);
                        if d2 <= r2 {
                            let v = &mut data[grid.index(i, j)];
                            *v = (*v as f64 * gain) as f32;
                        }
                    }
                }
            }
        }
        for prim in &description.primitives {
            if let Primitive::Point {
                x_m,
                z_m,
                amplitude,
            } = *prim
            {
                let (i, j) = locate(grid, x_m, z_m)?;
                data[grid.index(i, j)] += amplitude as f32;
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("scene reflectivity is not finite".into()));
        }
        Ok(Self {
            reflectivity: ImageVec::new(grid.clone(), data)?,
            description,
        })
    }

    pub fn grid(&self) -> &ImagingGrid {
        self.reflectivity.grid()
    }
}

fn locate(grid: &ImagingGrid, x: f64, z: f64) -> Result<(usize, usize)> {
    grid.nearest_pixel(x, z).ok_or_else(|| {
        Error::InvalidArgument(format!("point ({x}, {z}) m lies outside the imaging grid"))
    })
}

/// Point reflectors at the nearest pixels; zero elsewhere.
pub fn make_point_phantom(grid: &ImagingGrid, points: &[((f64, f64), f64)]) -> Result<Scene> {
    let primitives = points
        .iter()
        .map(|&((x_m, z_m), amplitude)| Primitive::Point {
            x_m,
            z_m,
            amplitude,
        })
        .collect();
    Scene::from_description(grid, SceneDescription { primitives })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: (f64, f64),
    pub radius: f64,
    pub gain: f64,
}

/// Gaussian speckle background with multiplicative disc inclusions.
pub fn make_cyst_phantom(
    grid: &ImagingGrid,
    discs: &[Disc],
    speckle_std: f64,
    seed: u64,
) -> Result<Scene> {
    let mut primitives = vec![Primitive::Speckle {
        std: speckle_std,
        seed,
    }];
    primitives.extend(discs.iter().map(|d| Primitive::Disc {
        center_x_m: d.center.0,
        center_z_m: d.center.1,
        radius_m: d.radius,
        gain: d.gain,
    }));
    Scene::from_description(grid, SceneDescription { primitives })
}

/// Additive white Gaussian channel noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub std: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { std: 0.0, seed: 0 }
    }

    /// Adds noise for transmit `angle_index` in element-major order from the
    /// generator keyed by `seed ^ angle_index`.
    pub fn apply(&self, frame: &mut RfFrame, angle_index: usize) -> Result<()> {
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise std must be >= 0, got {}",
                self.std
            )));
        }
        if self.std == 0.0 {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ angle_index as u64);
        for v in frame.data_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += (self.std * n) as f32;
        }
        Ok(())
    }
}

/// One noisy RF frame per angle of the acquisition sequence.
pub fn simulate_rf(
    scene: &Scene,
    acq: &AcquisitionConfig,
    noise: &NoiseModel,
) -> Result<Vec<RfFrame>> {
    let g = acq.grid();
    if scene.grid().num_axial != g.num_axial || scene.grid().num_lateral != g.num_lateral {
        return Err(Error::shape("scene grid", g.len(), scene.grid().len()));
    }
    acq.sequence()
        .angles()
        .enumerate()
        .map(|(idx, angle)| {
            let op = build_measurement_matrix(acq, angle)?;
            let mut frame = op.apply_forward(&scene.reflectivity)?;
            noise.apply(&mut frame, idx)?;
            Ok(frame)
        })
        .collect()
}
