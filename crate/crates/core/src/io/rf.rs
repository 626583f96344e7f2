//! "PWRF" multi-angle RF files.
//!
//! Layout (little-endian): magic `PWRF`, `u16` version, `u32` num_angles,
//! `u32` elements, `u32` samples, `f64` sampling rate, num_angles x `f64`
//! angles in radians, 32-byte geometry fingerprint, then the `f32` payload
//! angle-major, element-major, sample-minor.

use std::path::Path;

use super::{put_f32s, tensor::annotate, ByteReader};
use crate::data::RfFrame;
use crate::error::{Error, Result};
use crate::geometry::{AcquisitionConfig, Fingerprint};

pub const RF_MAGIC: &[u8; 4] = b"PWRF";
pub const RF_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RfDataset {
    pub num_elements: usize,
    pub num_samples: usize,
    pub sampling_rate: f64,
    pub fingerprint: Fingerprint,
    pub frames: Vec<RfFrame>,
}

impl RfDataset {
    pub fn new(acq: &AcquisitionConfig, frames: Vec<RfFrame>) -> Result<Self> {
        let t = acq.transducer();
        for f in &frames {
            f.check_matches(t)?;
        }
        Ok(Self {
            num_elements: t.num_elements,
            num_samples: t.num_samples,
            sampling_rate: t.sampling_rate,
            fingerprint: acq.fingerprint(),
            frames,
        })
    }

    /// Fails unless the file was recorded with exactly this geometry.
    pub fn check_acquisition(&self, acq: &AcquisitionConfig) -> Result<()> {
        if self.fingerprint != acq.fingerprint() {
            return Err(Error::Config(
                "RF file fingerprint does not match the acquisition config".into(),
            ));
        }
        Ok(())
    }

    pub fn frame(&self, index: usize) -> Result<&RfFrame> {
        self.frames.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "angle index {index} out of range for {} frames",
                self.frames.len()
            ))
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let per = self.num_elements * self.num_samples;
        let mut out = Vec::with_capacity(58 + 8 * self.frames.len() + 4 * per * self.frames.len());
        out.extend_from_slice(RF_MAGIC);
        out.extend_from_slice(&RF_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.num_elements as u32).to_le_bytes());
        out.extend_from_slice(&(self.num_samples as u32).to_le_bytes());
        out.extend_from_slice(&self.sampling_rate.to_le_bytes());
        for f in &self.frames {
            out.extend_from_slice(&f.angle.to_le_bytes());
        }
        out.extend_from_slice(&self.fingerprint);
        for f in &self.frames {
            if f.shape() != (self.num_elements, self.num_samples) {
                return Err(Error::shape("RF frame", per, f.len()));
            }
            put_f32s(&mut out, f.data());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(RF_MAGIC)?;
        let version = r.u16()?;
        if version != RF_VERSION {
            return Err(Error::format(4, format!("unsupported PWRF version {version}")));
        }
        let num_angles = r.u32()? as usize;
        let num_elements = r.u32()? as usize;
        let num_samples = r.u32()? as usize;
        let sampling_rate = r.f64()?;
        let angles = r.f64_vec(num_angles)?;
        let fingerprint = r.array32()?;
        let per = num_elements
            .checked_mul(num_samples)
            .ok_or_else(|| r.error("frame size overflows"))?;
        let mut frames = Vec::with_capacity(num_angles);
        for angle in angles {
            let data = r.f32_vec(per)?;
            frames.push(RfFrame::new(num_elements, num_samples, angle, data)?);
        }
        r.expect_end()?;
        Ok(Self {
            num_elements,
            num_samples,
            sampling_rate,
            fingerprint,
            frames,
        })
    }
}

pub fn write_rf(path: &Path, data: &RfDataset) -> Result<()> {
    std::fs::write(path, data.encode()?).map_err(|e| Error::io(path, e))
}

pub fn read_rf(path: &Path) -> Result<RfDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    RfDataset::decode(&bytes).map_err(|e| annotate(path, e))
}
