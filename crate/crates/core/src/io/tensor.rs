//! "TNSR" tensor messages and image files.
//!
//! Layout (little-endian): magic `TNSR`, `u32` rank, `rank` x `u64` dims,
//! `f64` sigma, then `prod(dims)` x `f32` payload in row-major order. The
//! same message is used on disk and on the external-denoiser pipe. Image
//! files carry a JSON sidecar (`<path>.json`) with the grid geometry.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::ByteReader;
use crate::data::ImageVec;
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;

pub const TENSOR_MAGIC: &[u8; 4] = b"TNSR";
/// Upper bound on rank accepted by readers.
pub const MAX_RANK: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub sigma: f64,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u64>, sigma: f64, data: Vec<f32>) -> Result<Self> {
        let expected = element_count(&dims)?;
        if expected != data.len() {
            return Err(Error::shape("tensor payload", expected, data.len()));
        }
        Ok(Self { dims, sigma, data })
    }

    pub fn from_image(image: &ImageVec, sigma: f64) -> Self {
        let g = image.grid();
        Self {
            dims: vec![g.num_axial as u64, g.num_lateral as u64],
            sigma,
            data: image.data().to_vec(),
        }
    }

    pub fn into_image(self, grid: &ImagingGrid) -> Result<ImageVec> {
        if self.dims != [grid.num_axial as u64, grid.num_lateral as u64] {
            return Err(Error::InvalidArgument(format!(
                "tensor dims {:?} do not match grid {}x{}",
                self.dims, grid.num_axial, grid.num_lateral
            )));
        }
        ImageVec::new(grid.clone(), self.data)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.sigma.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let t = Self::decode_from(&mut r)?;
        r.expect_end()?;
        Ok(t)
    }

    fn decode_from(r: &mut ByteReader) -> Result<Self> {
        r.magic(TENSOR_MAGIC)?;
        let (dims, sigma) = read_header(r)?;
        let n = element_count(&dims).map_err(|_| r.error("tensor element count overflows"))?;
        let data = r.f32_vec(n)?;
        Ok(Self { dims, sigma, data })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.encode())
    }

    /// Reads exactly one message from a stream.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut head = [0u8; 8];
        read_exact_at(r, &mut head, 0)?;
        if &head[..4] != TENSOR_MAGIC {
            return Err(Error::format(0, "bad magic, expected TNSR"));
        }
        let rank = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if rank > MAX_RANK {
            return Err(Error::format(4, format!("rank {rank} exceeds {MAX_RANK}")));
        }
        let mut rest = vec![0u8; 8 * rank as usize + 8];
        read_exact_at(r, &mut rest, 8)?;
        let mut buf = head.to_vec();
        buf.extend_from_slice(&rest);
        let dims: Vec<u64> = rest[..8 * rank as usize]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let n = element_count(&dims)
            .map_err(|_| Error::format(8, "tensor element count overflows"))?;
        let mut payload = vec![0u8; n * 4];
        read_exact_at(r, &mut payload, buf.len() as u64)?;
        buf.extend_from_slice(&payload);
        Self::decode(&buf)
    }
}

fn read_header(r: &mut ByteReader) -> Result<(Vec<u64>, f64)> {
    let rank = r.u32()?;
    if rank > MAX_RANK {
        return Err(r.error(format!("rank {rank} exceeds {MAX_RANK}")));
    }
    let dims = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let sigma = r.f64()?;
    Ok((dims, sigma))
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(offset, "truncated tensor message")
        } else {
            Error::format(offset, format!("read failed: {e}"))
        }
    })
}

fn element_count(dims: &[u64]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(usize::try_from(d).ok()?))
        .ok_or_else(|| Error::InvalidArgument("tensor element count overflows".into()))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_tensor_file(path: &Path, t: &Tensor) -> Result<()> {
    std::fs::write(path, t.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_file(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::decode(&bytes).map_err(|e| annotate(path, e))
}

/// Writes the image as a rank-2 TNSR file plus its grid sidecar.
pub fn write_tensor(path: &Path, image: &ImageVec) -> Result<()> {
    write_tensor_file(path, &Tensor::from_image(image, 0.0))?;
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(image.grid()).expect("grid serializes");
    std::fs::write(&side, text).map_err(|e| Error::io(side, e))
}

pub fn read_tensor(path: &Path) -> Result<ImageVec> {
    let t = read_tensor_file(path)?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let grid: ImagingGrid = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: side.clone(),
        source,
    })?;
    grid.validate()
        .map_err(|e| Error::Config(format!("{}: {e}", side.display())))?;
    t.into_image(&grid)
}

pub(crate) fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}
