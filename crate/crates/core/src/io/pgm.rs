use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Binary 16-bit PGM (P5, big-endian samples). Values are min-max scaled to
/// [0, 65535] with round-to-nearest; a constant image maps to 0.
pub fn encode_pgm(image: &Grid<f64>) -> Result<Vec<u8>> {
    if let Some(bad) = image.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidValue(format!("cannot preview non-finite value {bad}")));
    }
    let (lo, hi) = image
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n65535\n", image.width(), image.height()).into_bytes();
    out.reserve(image.len() * 2);
    for &x in image.iter() {
        let s = if span > 0.0 {
            ((x - lo) / span * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&s.to_be_bytes());
    }
    Ok(out)
}

pub fn write_preview_pgm(image: &Grid<f64>, path: &Path) -> Result<()> {
    super::write_file(path, &encode_pgm(image)?)
}
