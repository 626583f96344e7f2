//! Envelope detection, log compression and image-quality metrics.

mod contrast;
mod envelope;
mod resolution;
mod roi;

pub use contrast::{
    cnr, cnr_in, cnr_samples, gcnr, gcnr_samples, max_sidelobe_db, CnrDomain,
    CNR_ZERO_CONTRAST, DEFAULT_GCNR_BINS,
};
pub use envelope::{bmode, envelope, BmodeImage, DEFAULT_DYNAMIC_RANGE_DB};
pub use resolution::{find_peak_near, fwhm, fwhm_profile, Axis};
pub use roi::{Roi, RoiShape};
