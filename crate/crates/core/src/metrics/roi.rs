use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;

/// Region of interest in physical units (metres), resolved against a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoiShape {
    Rect {
        x_min_m: f64,
        x_max_m: f64,
        z_min_m: f64,
        z_max_m: f64,
    },
    Ellipse {
        center_x_m: f64,
        center_z_m: f64,
        radius_x_m: f64,
        radius_z_m: f64,
    },
    /// Explicit `[i, j]` pixel indices.
    Pixels { indices: Vec<[usize; 2]> },
}

/// Nonempty set of flat pixel indices, sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roi {
    pixels: Vec<usize>,
}

impl Roi {
    pub fn from_indices(grid: &ImagingGrid, indices: &[(usize, usize)]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(indices.len());
        for &(i, j) in indices {
            if i >= grid.num_axial || j >= grid.num_lateral {
                return Err(Error::InvalidArgument(format!(
                    "ROI pixel ({i}, {j}) outside {}x{} grid",
                    grid.num_axial, grid.num_lateral
                )));
            }
            pixels.push(grid.index(i, j));
        }
        Self::finish(pixels)
    }

    pub fn rect(grid: &ImagingGrid, x: (f64, f64), z: (f64, f64)) -> Result<Self> {
        Self::select(grid, |px, pz| px >= x.0 && px <= x.1 && pz >= z.0 && pz <= z.1)
    }

    pub fn ellipse(grid: &ImagingGrid, center: (f64, f64), radius: (f64, f64)) -> Result<Self> {
        if !(radius.0 > 0.0 && radius.1 > 0.0) {
            return Err(Error::InvalidArgument("ellipse radii must be > 0".into()));
        }
        Self::select(grid, |px, pz| {
            let (u, v) = ((px - center.0) / radius.0, (pz - center.1) / radius.1);
            u * u + v * v <= 1.0
        })
    }

    pub fn from_shape(grid: &ImagingGrid, shape: &RoiShape) -> Result<Self> {
        match shape {
            RoiShape::Rect {
                x_min_m,
                x_max_m,
                z_min_m,
                z_max_m,
            } => Self::rect(grid, (*x_min_m, *x_max_m), (*z_min_m, *z_max_m)),
            RoiShape::Ellipse {
                center_x_m,
                center_z_m,
                radius_x_m,
                radius_z_m,
            } => Self::ellipse(grid, (*center_x_m, *center_z_m), (*radius_x_m, *radius_z_m)),
            RoiShape::Pixels { indices } => {
                let ij: Vec<_> = indices.iter().map(|p| (p[0], p[1])).collect();
                Self::from_indices(grid, &ij)
            }
        }
    }

    fn select(grid: &ImagingGrid, inside: impl Fn(f64, f64) -> bool) -> Result<Self> {
        let mut pixels = Vec::new();
        for i in 0..grid.num_axial {
            for j in 0..grid.num_lateral {
                let (x, z) = grid.position(i, j);
                if inside(x, z) {
                    pixels.push(grid.index(i, j));
                }
            }
        }
        Self::finish(pixels)
    }

    fn finish(mut pixels: Vec<usize>) -> Result<Self> {
        pixels.sort_unstable();
        pixels.dedup();
        if pixels.is_empty() {
            return Err(Error::DegenerateInput("ROI covers no pixels".into()));
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn values(&self, data: &[f32]) -> Vec<f64> {
        self.pixels.iter().map(|&p| data[p] as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ImagingGrid {
        ImagingGrid {
            num_axial: 10,
            num_lateral: 10,
            dz: 1e-3,
            dx: 1e-3,
            z0: 0.0,
        }
    }

    #[test]
    fn rect_and_ellipse_counts() {
        let g = grid();
        // Lateral positions are -4.5 .. 4.5 mm.
        let r = Roi::rect(&g, (-1e-3, 1e-3), (0.0, 2.5e-3)).unwrap();
        assert_eq!(r.len(), 2 * 3);
        let e = Roi::ellipse(&g, (g.lateral(5), g.axial(5)), (1.01e-3, 1.01e-3)).unwrap();
        assert_eq!(e.len(), 5);
    }

    #[test]
    fn empty_and_out_of_grid() {
        let g = grid();
        assert!(Roi::rect(&g, (1.0, 2.0), (1.0, 2.0)).is_err());
        assert!(Roi::from_indices(&g, &[(10, 0)]).is_err());
        assert!(Roi::from_indices(&g, &[]).is_err());
    }

    #[test]
    fn json_shapes() {
        let s: RoiShape = serde_json::from_str(r#"{"shape":"pixels","indices":[[0,1],[0,1],[2,3]]}"#).unwrap();
        assert_eq!(Roi::from_shape(&grid(), &s).unwrap().pixels(), &[1, 23]);
        let s: RoiShape = serde_json::from_str(
            r#"{"shape":"ellipse","center_x_m":0,"center_z_m":0.005,"radius_x_m":0.002,"radius_z_m":0.001}"#,
        )
        .unwrap();
        assert!(matches!(s, RoiShape::Ellipse { .. }));
    }
}
