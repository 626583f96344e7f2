//! "PWH1" operator files.
//!
//! Layout (little-endian): magic `PWH1`, `u64` rows, `u64` cols, `u64` nnz,
//! `f64` angle in radians, 32-byte geometry fingerprint, then rows+1 x `u64`
//! row offsets, nnz x `u32` column indices and nnz x `f32` values.

use std::path::Path;

use super::{put_f32s, tensor::annotate, ByteReader};
use crate::error::{Error, Result};
use crate::geometry::{AcquisitionConfig, Fingerprint};
use crate::operator::{Csr, SparseOperator};

pub const OPERATOR_MAGIC: &[u8; 4] = b"PWH1";

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorHeader {
    pub rows: u64,
    pub cols: u64,
    pub nnz: u64,
    pub angle: f64,
    pub fingerprint: Fingerprint,
}

pub fn encode_operator(op: &SparseOperator) -> Vec<u8> {
    let m = op.csr();
    let mut out = Vec::with_capacity(68 + 8 * m.offsets.len() + 8 * m.values.len());
    out.extend_from_slice(OPERATOR_MAGIC);
    out.extend_from_slice(&(op.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(op.cols() as u64).to_le_bytes());
    out.extend_from_slice(&(op.nnz() as u64).to_le_bytes());
    out.extend_from_slice(&op.angle().to_le_bytes());
    out.extend_from_slice(op.fingerprint());
    for o in &m.offsets {
        out.extend_from_slice(&o.to_le_bytes());
    }
    for c in &m.indices {
        out.extend_from_slice(&c.to_le_bytes());
    }
    put_f32s(&mut out, &m.values);
    out
}

/// Parses the container without binding it to a geometry.
pub fn decode_operator(bytes: &[u8]) -> Result<(OperatorHeader, Csr)> {
    let mut r = ByteReader::new(bytes);
    r.magic(OPERATOR_MAGIC)?;
    let header = OperatorHeader {
        rows: r.u64()?,
        cols: r.u64()?,
        nnz: r.u64()?,
        angle: r.f64()?,
        fingerprint: r.array32()?,
    };
    let count = |v: u64, r: &ByteReader| usize::try_from(v).map_err(|_| r.error("size overflows"));
    let rows = count(header.rows, &r)?;
    let nnz = count(header.nnz, &r)?;
    let offsets = r.u64_vec(rows.checked_add(1).ok_or_else(|| r.error("size overflows"))?)?;
    let indices = r.u32_vec(nnz)?;
    let values = r.f32_vec(nnz)?;
    r.expect_end()?;
    Ok((
        header,
        Csr {
            offsets,
            indices,
            values,
        },
    ))
}

pub fn write_operator(path: &Path, op: &SparseOperator) -> Result<()> {
    std::fs::write(path, encode_operator(op)).map_err(|e| Error::io(path, e))
}

/// Reads an operator and checks it against `acq`.
pub fn read_operator(path: &Path, acq: &AcquisitionConfig) -> Result<SparseOperator> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, csr) = decode_operator(&bytes).map_err(|e| annotate(path, e))?;
    SparseOperator::from_parts(acq, h.rows as usize, h.cols as usize, h.angle, h.fingerprint, csr)
        .map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
}
