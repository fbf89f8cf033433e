use crate::error::{Error, Result};
use crate::types::{Point, PointCloud};

const RECORD: usize = 16;

/// Decodes a `.bin` scan: consecutive little-endian `f32` quadruples
/// `(x, y, z, remission)`. Remission is clamped to [0, 1].
pub fn read_scan_bin(bytes: &[u8]) -> Result<PointCloud> {
    read_scan_bin_scaled(bytes, 1.0)
}

/// Like [`read_scan_bin`], dividing remission by `remission_max` before the clamp.
pub fn read_scan_bin_scaled(bytes: &[u8], remission_max: f32) -> Result<PointCloud> {
    if bytes.len() % RECORD != 0 {
        return Err(Error::Length(format!(
            "scan of {} bytes is not a multiple of {RECORD}",
            bytes.len()
        )));
    }
    if !(remission_max > 0.0 && remission_max.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "remission scale {remission_max} must be positive"
        )));
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD);
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let (x, y, z, rem) = (f(0), f(1), f(2), f(3));
        if ![x, y, z, rem].iter().all(|v| v.is_finite()) {
            return Err(Error::Decode(format!("record {i} holds a non-finite value")));
        }
        let refl = if remission_max == 1.0 { rem } else { rem / remission_max };
        points.push(Point::new(x, y, z, refl.clamp(0.0, 1.0)));
    }
    PointCloud::new(points)
}

pub fn write_scan_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.count() * RECORD);
    for p in cloud.points() {
        for v in [p.x, p.y, p.z, p.reflectivity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}
