//! Sparse time-of-flight measurement operator `H` mapping image
//! reflectivity to RF channel samples, `y = H x`.
//!
//! Rows are RF samples (`k * N_s + s`), columns are pixels (`i * N_x + j`).
//! Each (pixel, element) pair contributes at most two interpolation taps.
//! The operator keeps both the CSR form of `H` (forward, row-parallel) and the
//! CSR form of `H^T` (adjoint, column-parallel), so neither product needs a
//! scattered reduction and results do not depend on the thread count.

use rayon::prelude::*;

use crate::data::{ImageVec, RfFrame};
use crate::error::{Error, Result};
use crate::geometry::{AcquisitionConfig, DelayModel, Fingerprint, ImagingGrid};

/// Pixels per parallel work unit when building.
const BUILD_CHUNK: usize = 256;
const MIN_PAR_LEN: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    Nearest,
}

/// Interpolation taps for one fractional sample index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Taps {
    pub len: usize,
    pub index: [usize; 2],
    pub weight: [f32; 2],
}

impl Taps {
    #[inline]
    pub(crate) fn iter(&self) -> impl Iterator<Item = (usize, f32)> + '_ {
        (0..self.len).map(move |t| (self.index[t], self.weight[t]))
    }
}

/// Taps for sample position `s`, or `None` outside `[0, num_samples - 1]`.
/// Shared by the operator build and the beamformer so both see identical
/// weights.
#[inline]
pub(crate) fn taps(s: f64, num_samples: usize, interp: Interpolation) -> Option<Taps> {
    if !(s >= 0.0 && s <= (num_samples - 1) as f64) {
        return None;
    }
    let single = |idx: usize| Taps {
        len: 1,
        index: [idx, idx],
        weight: [1.0, 0.0],
    };
    match interp {
        Interpolation::Nearest => Some(single(s.round() as usize)),
        Interpolation::Linear => {
            let lo = s.floor();
            let frac = s - lo;
            let lo = lo as usize;
            if frac == 0.0 {
                Some(single(lo))
            } else {
                Some(Taps {
                    len: 2,
                    index: [lo, lo + 1],
                    weight: [(1.0 - frac) as f32, frac as f32],
                })
            }
        }
    }
}

/// Compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub offsets: Vec<u64>,
    pub indices: Vec<u32>,
    pub values: Vec<f32>,
}

impl Csr {
    #[inline]
    fn row(&self, r: usize) -> (&[u32], &[f32]) {
        let (a, b) = (self.offsets[r] as usize, self.offsets[r + 1] as usize);
        (&self.indices[a..b], &self.values[a..b])
    }

    fn transpose(&self, num_rows: usize, num_cols: usize) -> Csr {
        let mut counts = vec![0u64; num_cols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for c in 0..num_cols {
            counts[c + 1] += counts[c];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.indices.len()];
        let mut values = vec![0f32; self.values.len()];
        for r in 0..num_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c as usize] as usize;
                indices[slot] = r as u32;
                values[slot] = v;
                next[c as usize] += 1;
            }
        }
        Csr {
            offsets,
            indices,
            values,
        }
    }

    /// `out[r] = sum_c A[r, c] * x[c]`, accumulated in double precision.
    fn matvec(&self, x: &[f32], out: &mut [f32]) {
        out.par_iter_mut()
            .with_min_len(MIN_PAR_LEN)
            .enumerate()
            .for_each(|(r, o)| {
                let (cols, vals) = self.row(r);
                let mut acc = 0.0f64;
                for (&c, &v) in cols.iter().zip(vals) {
                    acc += v as f64 * x[c as usize] as f64;
                }
                *o = acc as f32;
            });
    }
}

/// The measurement matrix for one plane-wave transmission.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    forward: Csr,
    adjoint: Csr,
    angle: f64,
    fingerprint: Fingerprint,
    grid: ImagingGrid,
    frame_shape: (usize, usize),
}

impl PartialEq for SparseOperator {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.forward == other.forward
            && self.angle.to_bits() == other.angle.to_bits()
            && self.fingerprint == other.fingerprint
            && self.grid == other.grid
            && self.frame_shape == other.frame_shape
    }
}

/// Builds `H` for one steering angle with linear interpolation.
pub fn build_measurement_matrix(acq: &AcquisitionConfig, angle: f64) -> Result<SparseOperator> {
    build_measurement_matrix_with(acq, angle, Interpolation::Linear)
}

pub fn build_measurement_matrix_with(
    acq: &AcquisitionConfig,
    angle: f64,
    interp: Interpolation,
) -> Result<SparseOperator> {
    let t = acq.transducer();
    let grid = acq.grid();
    if !(angle.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Config(format!(
            "steering angle {angle} rad outside (-pi/2, pi/2)"
        )));
    }
    let rows = t.frame_len();
    let cols = grid.len();
    if rows > u32::MAX as usize || cols > u32::MAX as usize {
        return Err(Error::Config(format!(
            "operator of {rows}x{cols} exceeds 32-bit index range"
        )));
    }
    let model = DelayModel::new(t, angle);
    let elements: Vec<f64> = (0..t.num_elements).map(|k| t.element_x(k)).collect();
    let ns = t.num_samples;

    // Column-major pass: one chunk of pixels per task, concatenated in order.
    let chunks: Vec<(Vec<u64>, Vec<u32>, Vec<f32>)> = (0..cols)
        .collect::<Vec<_>>()
        .par_chunks(BUILD_CHUNK)
        .map(|pixels| {
            let mut counts = Vec::with_capacity(pixels.len());
            let mut idx = Vec::with_capacity(pixels.len() * elements.len() * 2);
            let mut val = Vec::with_capacity(pixels.len() * elements.len() * 2);
            for &p in pixels {
                let (x, z) = grid.position(p / grid.num_lateral, p % grid.num_lateral);
                let tx = model.tx(x, z);
                let before = idx.len();
                for (k, &xe) in elements.iter().enumerate() {
                    let s = model.sample(tx + model.rx(x, z, xe));
                    if let Some(tp) = taps(s, ns, interp) {
                        for (si, w) in tp.iter() {
                            idx.push((k * ns + si) as u32);
                            val.push(w);
                        }
                    }
                }
                counts.push((idx.len() - before) as u64);
            }
            (counts, idx, val)
        })
        .collect();

    let nnz: usize = chunks.iter().map(|c| c.1.len()).sum();
    let mut offsets = Vec::with_capacity(cols + 1);
    let mut indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    offsets.push(0u64);
    for (counts, idx, val) in chunks {
        for c in counts {
            let last = *offsets.last().unwrap();
            offsets.push(last + c);
        }
        indices.extend_from_slice(&idx);
        values.extend_from_slice(&val);
    }
    let adjoint = Csr {
        offsets,
        indices,
        values,
    };
    let forward = adjoint.transpose(cols, rows);
    Ok(SparseOperator {
        rows,
        cols,
        forward,
        adjoint,
        angle,
        fingerprint: acq.fingerprint(),
        grid: grid.clone(),
        frame_shape: (t.num_elements, t.num_samples),
    })
}

impl SparseOperator {
    /// Reassembles an operator from stored CSR parts, checking structure and
    /// binding it to `acq`.
    pub fn from_parts(
        acq: &AcquisitionConfig,
        rows: usize,
        cols: usize,
        angle: f64,
        fingerprint: Fingerprint,
        forward: Csr,
    ) -> Result<Self> {
        if fingerprint != acq.fingerprint() {
            return Err(Error::Config(
                "operator fingerprint does not match acquisition geometry".into(),
            ));
        }
        let t = acq.transducer();
        if rows != t.frame_len() {
            return Err(Error::shape("operator rows", t.frame_len(), rows));
        }
        if cols != acq.grid().len() {
            return Err(Error::shape("operator cols", acq.grid().len(), cols));
        }
        validate_csr(&forward, rows, cols)?;
        let adjoint = forward.transpose(rows, cols);
        Ok(Self {
            rows,
            cols,
            forward,
            adjoint,
            angle,
            fingerprint,
            grid: acq.grid().clone(),
            frame_shape: (t.num_elements, t.num_samples),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.forward.values.len()
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn grid(&self) -> &ImagingGrid {
        &self.grid
    }

    pub fn frame_shape(&self) -> (usize, usize) {
        self.frame_shape
    }

    /// CSR storage of `H`.
    pub fn csr(&self) -> &Csr {
        &self.forward
    }

    /// Nonzeros of row `q` as `(pixel, weight)`.
    pub fn row(&self, q: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let (c, v) = self.forward.row(q);
        c.iter().zip(v).map(|(&c, &v)| (c as usize, v))
    }

    /// Nonzeros of column `p` as `(rf_index, weight)`, ordered by row.
    pub fn column(&self, p: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let (r, v) = self.adjoint.row(p);
        r.iter().zip(v).map(|(&r, &v)| (r as usize, v))
    }

    /// `y = H x`.
    pub fn apply_forward(&self, x: &ImageVec) -> Result<RfFrame> {
        let mut y = vec![0f32; self.rows];
        self.forward_into(x.data(), &mut y)?;
        let (nc, ns) = self.frame_shape;
        RfFrame::new(nc, ns, self.angle, y)
    }

    /// `H^T y`.
    pub fn apply_adjoint(&self, y: &RfFrame) -> Result<ImageVec> {
        let mut x = vec![0f32; self.cols];
        self.adjoint_into(y.data(), &mut x)?;
        ImageVec::new(self.grid.clone(), x)
    }

    pub fn forward_into(&self, x: &[f32], y: &mut [f32]) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::shape("operator input image", self.cols, x.len()));
        }
        if y.len() != self.rows {
            return Err(Error::shape("operator output rf", self.rows, y.len()));
        }
        self.forward.matvec(x, y);
        Ok(())
    }

    pub fn adjoint_into(&self, y: &[f32], x: &mut [f32]) -> Result<()> {
        if y.len() != self.rows {
            return Err(Error::shape("adjoint input rf", self.rows, y.len()));
        }
        if x.len() != self.cols {
            return Err(Error::shape("adjoint output image", self.cols, x.len()));
        }
        self.adjoint.matvec(y, x);
        Ok(())
    }

    /// Largest singular value of `H` by power iteration on `H^T H`.
    pub fn spectral_norm_estimate(&self, iterations: usize) -> f64 {
        let mut v = vec![1.0f32; self.cols];
        let mut hv = vec![0f32; self.rows];
        let mut sigma2 = 0.0;
        for _ in 0..iterations {
            let n = crate::data::norm(&v);
            if n == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|a| *a = (*a as f64 / n) as f32);
            self.forward.matvec(&v, &mut hv);
            self.adjoint.matvec(&hv, &mut v);
            sigma2 = crate::data::norm(&v);
        }
        sigma2.sqrt()
    }
}

pub(crate) fn validate_csr(m: &Csr, rows: usize, cols: usize) -> Result<()> {
    let nnz = m.values.len();
    if m.offsets.len() != rows + 1 {
        return Err(Error::Config(format!(
            "row_offsets has length {}, expected {}",
            m.offsets.len(),
            rows + 1
        )));
    }
    if m.indices.len() != nnz {
        return Err(Error::Config("col_indices and values lengths differ".into()));
    }
    if m.offsets[0] != 0 || m.offsets[rows] != nnz as u64 {
        return Err(Error::Config("row_offsets does not span [0, nnz]".into()));
    }
    if m.offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("row_offsets is not nondecreasing".into()));
    }
    if let Some(c) = m.indices.iter().find(|&&c| c as usize >= cols) {
        return Err(Error::Config(format!("column index {c} out of range {cols}")));
    }
    if let Some(v) = m.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Config(format!("weight {v} outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::{PlaneWaveSequence, TransducerConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_pixel_acq() -> AcquisitionConfig {
        let t = TransducerConfig {
            num_elements: 2,
            pitch: 0.02,
            sampling_rate: 25e6,
            num_samples: 1300,
            sound_speed: 1540.0,
            t0_offset: 0.0,
        };
        let grid = ImagingGrid {
            num_axial: 1,
            num_lateral: 1,
            dz: 1e-4,
            dx: 1e-4,
            z0: 0.010,
        };
        AcquisitionConfig::new(t, grid, PlaneWaveSequence::single(0.0)).unwrap()
    }

    pub(crate) fn small_acq(nz: usize, nx: usize, nc: usize, ns: usize) -> AcquisitionConfig {
        let t = TransducerConfig {
            num_elements: nc,
            pitch: 0.0003,
            sampling_rate: 25e6,
            num_samples: ns,
            sound_speed: 1540.0,
            t0_offset: 0.0,
        };
        let grid = ImagingGrid::for_transducer(&t, nz, nx);
        AcquisitionConfig::new(t, grid, PlaneWaveSequence::uniform(3, 10.0)).unwrap()
    }

    #[test]
    fn taps_linear_and_nearest() {
        let t = taps(324.675, 1300, Interpolation::Linear).unwrap();
        assert_eq!(t.len, 2);
        assert_eq!(t.index, [324, 325]);
        assert!((t.weight[0] - 0.325).abs() < 1e-6);
        assert!((t.weight[1] - 0.675).abs() < 1e-6);
        let t = taps(12.0, 1300, Interpolation::Linear).unwrap();
        assert_eq!((t.len, t.index[0], t.weight[0]), (1, 12, 1.0));
        let t = taps(12.6, 1300, Interpolation::Nearest).unwrap();
        assert_eq!((t.len, t.index[0]), (1, 13));
        assert!(taps(1299.5, 1300, Interpolation::Linear).is_none());
        assert!(taps(-0.1, 1300, Interpolation::Linear).is_none());
        assert!(taps(f64::NAN, 1300, Interpolation::Linear).is_none());
        assert!(taps(1299.0, 1300, Interpolation::Linear).is_some());
    }

    #[test]
    fn broadside_pixel_over_element() {
        // Pixel at depth 10 mm directly under element 0 (x_e = 0) requires an
        // odd element count centered at zero.
        let t = TransducerConfig {
            num_elements: 3,
            pitch: 0.0003,
            sampling_rate: 25e6,
            num_samples: 1300,
            sound_speed: 1540.0,
            t0_offset: 0.0,
        };
        let grid = ImagingGrid {
            num_axial: 1,
            num_lateral: 1,
            dz: 1e-4,
            dx: 1e-4,
            z0: 0.010,
        };
        let acq = AcquisitionConfig::new(t, grid, PlaneWaveSequence::single(0.0)).unwrap();
        let op = build_measurement_matrix(&acq, 0.0).unwrap();
        let center: Vec<_> = op.column(0).filter(|(r, _)| r / 1300 == 1).collect();
        assert_eq!(center.len(), 2);
        assert_eq!(center[0].0 - 1300, 324);
        assert_eq!(center[1].0 - 1300, 325);
        // Round trip 20 mm at 1540 m/s and 25 MHz is sample 324.6753.
        let frac = (0.02 / 1540.0 * 25e6f64).fract();
        assert!((center[0].1 as f64 - (1.0 - frac)).abs() < 1e-6, "{:?}", center);
        assert!((center[1].1 as f64 - frac).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_pixel_has_empty_column() {
        let mut acq = one_pixel_acq();
        let mut grid = acq.grid().clone();
        grid.z0 = 0.2;
        acq = AcquisitionConfig::new(acq.transducer().clone(), grid, acq.sequence().clone())
            .unwrap();
        let op = build_measurement_matrix(&acq, 0.0).unwrap();
        assert_eq!(op.nnz(), 0);
        assert_eq!(op.column(0).count(), 0);
    }

    #[test]
    fn structure_invariants() {
        let acq = small_acq(32, 16, 8, 256);
        let op = build_measurement_matrix(&acq, 0.1).unwrap();
        validate_csr(op.csr(), op.rows(), op.cols()).unwrap();
        assert!(op.nnz() <= 2 * 8 * 32 * 16);
        // Per (pixel, element) the weights sum to one.
        for p in 0..op.cols() {
            let mut per_elem = vec![0f64; 8];
            let mut seen = vec![false; 8];
            for (r, w) in op.column(p) {
                per_elem[r / 256] += w as f64;
                seen[r / 256] = true;
            }
            for k in 0..8 {
                if seen[k] {
                    assert!((per_elem[k] - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn build_is_deterministic_across_thread_counts() {
        let acq = small_acq(64, 32, 16, 256);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| build_measurement_matrix(&acq, 0.2).unwrap());
        let b = four.install(|| build_measurement_matrix(&acq, 0.2).unwrap());
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ImageVec::new(
            acq.grid().clone(),
            (0..acq.grid().len()).map(|_| rng.random::<f32>()).collect(),
        )
        .unwrap();
        let ya = one.install(|| a.apply_forward(&x).unwrap());
        let yb = four.install(|| b.apply_forward(&x).unwrap());
        assert_eq!(ya, yb);
        let xa = one.install(|| a.apply_adjoint(&ya).unwrap());
        let xb = four.install(|| b.apply_adjoint(&ya).unwrap());
        assert_eq!(xa, xb);
    }

    #[test]
    fn forward_of_zero_and_one_hot() {
        let acq = small_acq(16, 8, 4, 128);
        let op = build_measurement_matrix(&acq, 0.0).unwrap();
        let zero = ImageVec::zeros(acq.grid().clone());
        assert!(op.apply_forward(&zero).unwrap().data().iter().all(|&v| v == 0.0));
        let p = 5 * 8 + 3;
        let mut x = zero.clone();
        x.data_mut()[p] = 1.0;
        let y = op.apply_forward(&x).unwrap();
        let mut expected = vec![0f32; op.rows()];
        for (r, w) in op.column(p) {
            expected[r] = w;
        }
        assert_eq!(y.data(), &expected[..]);
    }

    #[test]
    fn adjoint_of_zero_and_one_hot() {
        let acq = small_acq(16, 8, 4, 128);
        let op = build_measurement_matrix(&acq, 0.0).unwrap();
        let zero = RfFrame::zeros(acq.transducer(), 0.0);
        assert!(op.apply_adjoint(&zero).unwrap().data().iter().all(|&v| v == 0.0));
        let q = (0..op.rows()).find(|&q| op.row(q).count() > 0).unwrap();
        let mut y = zero;
        y.data_mut()[q] = 1.0;
        let x = op.apply_adjoint(&y).unwrap();
        let mut expected = vec![0f32; op.cols()];
        for (c, w) in op.row(q) {
            expected[c] = w;
        }
        assert_eq!(x.data(), &expected[..]);
    }

    #[test]
    fn shape_errors() {
        let acq = small_acq(16, 8, 4, 128);
        let op = build_measurement_matrix(&acq, 0.0).unwrap();
        let bad_grid = ImagingGrid::for_transducer(acq.transducer(), 4, 4);
        assert!(matches!(
            op.apply_forward(&ImageVec::zeros(bad_grid)),
            Err(Error::Shape { .. })
        ));
        let bad_rf = RfFrame::new(4, 10, 0.0, vec![0.0; 40]).unwrap();
        assert!(matches!(op.apply_adjoint(&bad_rf), Err(Error::Shape { .. })));
    }

    #[test]
    fn linearity() {
        let acq = small_acq(16, 8, 4, 128);
        let op = build_measurement_matrix(&acq, -0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = acq.grid().len();
        let x1: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (0.7f32, -1.3f32);
        let combo: Vec<f32> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
        let g = acq.grid().clone();
        let y1 = op.apply_forward(&ImageVec::new(g.clone(), x1).unwrap()).unwrap();
        let y2 = op.apply_forward(&ImageVec::new(g.clone(), x2).unwrap()).unwrap();
        let yc = op.apply_forward(&ImageVec::new(g, combo).unwrap()).unwrap();
        let expect: Vec<f32> = y1
            .data()
            .iter()
            .zip(y2.data())
            .map(|(p, q)| a * p + b * q)
            .collect();
        let diff: Vec<f32> = yc.data().iter().zip(&expect).map(|(p, q)| p - q).collect();
        assert!(crate::data::norm(&diff) <= 1e-6 * crate::data::norm(&expect));
    }

    #[test]
    fn spectral_norm_of_one_hot_operator() {
        let acq = small_acq(16, 8, 4, 128);
        let op = build_measurement_matrix(&acq, 0.0).unwrap();
        let s = op.spectral_norm_estimate(50);
        assert!(s > 0.0 && s.is_finite());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f32> = (0..op.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut y = vec![0f32; op.rows()];
        op.forward_into(&x, &mut y).unwrap();
        assert!(crate::data::norm(&y) <= s * crate::data::norm(&x) * 1.001);
    }
}
