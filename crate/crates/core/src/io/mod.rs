//! Readers and writers for the on-disk formats: `.bin` scans, `.label`
//! files, NPY v1.0 tensors, 16-bit PGM previews and the JSON configuration.

mod config;
mod label;
mod npy;
mod pgm;
mod scan;

use std::path::Path;

pub use config::{load_config, parse_config, Config, PipelineParams};
pub use label::{pack_label, read_label_file, split_label, write_label_file, LabelRemap};
pub use npy::{decode_npy, encode_npy, read_tensor, write_tensor, NpyArray, NpyData};
pub use pgm::{encode_pgm, write_preview_pgm};
pub use scan::{read_scan_bin, read_scan_bin_scaled, write_scan_bin};

use crate::error::{Error, Result};

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
