//! 8-bit binary PGM export of B-mode images.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::BmodeImage;

/// `[-dr, 0] dB -> [0, 255]`, rounding half up.
pub fn gray_level(db: f32, dynamic_range_db: f64) -> u8 {
    let t = (db as f64 + dynamic_range_db) / dynamic_range_db * 255.0;
    (t + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(img: &BmodeImage) -> Vec<u8> {
    let g = &img.grid;
    let mut out = format!("P5\n{} {}\n255\n", g.num_lateral, g.num_axial).into_bytes();
    out.extend(
        img.data_db
            .iter()
            .map(|&v| gray_level(v, img.dynamic_range_db)),
    );
    out
}

pub fn export_pgm(img: &BmodeImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
