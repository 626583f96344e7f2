//! Image-domain and channel-domain tensors.

use crate::error::{Error, Result};
use crate::geometry::{ImagingGrid, TransducerConfig};

/// Image on an [`ImagingGrid`], row-major with the axial index outermost
/// (`index = i * N_x + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVec {
    grid: ImagingGrid,
    data: Vec<f32>,
}

impl ImageVec {
    pub fn new(grid: ImagingGrid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::shape("image data", grid.len(), data.len()));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: ImagingGrid) -> Self {
        let data = vec![0.0; grid.len()];
        Self { grid, data }
    }

    pub fn filled(grid: ImagingGrid, value: f32) -> Self {
        let data = vec![value; grid.len()];
        Self { grid, data }
    }

    pub fn grid(&self) -> &ImagingGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[self.grid.index(i, j)]
    }

    /// Same grid, new contents.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.grid.clone(), data)
    }

    pub fn check_same_shape(&self, other: &ImageVec) -> Result<()> {
        if self.grid.num_axial != other.grid.num_axial
            || self.grid.num_lateral != other.grid.num_lateral
        {
            return Err(Error::shape("image grid", self.len(), other.len()));
        }
        Ok(())
    }

    /// Euclidean norm accumulated in double precision.
    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Index and value of the largest entry.
    pub fn argmax(&self) -> (usize, usize, f32) {
        let (idx, v) = self
            .data
            .iter()
            .copied()
            .enumerate()
            .fold((0, f32::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best });
        (idx / self.grid.num_lateral, idx % self.grid.num_lateral, v)
    }
}

/// One plane-wave transmission of channel data, element-major
/// (`index = k * N_s + s`).
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrame {
    num_elements: usize,
    num_samples: usize,
    /// Steering angle in radians.
    pub angle: f64,
    data: Vec<f32>,
}

impl RfFrame {
    pub fn new(num_elements: usize, num_samples: usize, angle: f64, data: Vec<f32>) -> Result<Self> {
        if data.len() != num_elements * num_samples {
            return Err(Error::shape(
                "rf frame data",
                num_elements * num_samples,
                data.len(),
            ));
        }
        Ok(Self {
            num_elements,
            num_samples,
            angle,
            data,
        })
    }

    pub fn zeros(transducer: &TransducerConfig, angle: f64) -> Self {
        Self {
            num_elements: transducer.num_elements,
            num_samples: transducer.num_samples,
            angle,
            data: vec![0.0; transducer.frame_len()],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_elements, self.num_samples)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        &self.data[k * self.num_samples..(k + 1) * self.num_samples]
    }

    pub fn check_matches(&self, transducer: &TransducerConfig) -> Result<()> {
        if self.num_elements != transducer.num_elements {
            return Err(Error::shape(
                "rf channel count",
                transducer.num_elements,
                self.num_elements,
            ));
        }
        if self.num_samples != transducer.num_samples {
            return Err(Error::shape(
                "rf samples per channel",
                transducer.num_samples,
                self.num_samples,
            ));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&a| a as f64 * a as f64).sum::<f64>().sqrt()
}
