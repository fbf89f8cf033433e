//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use lrt_core::{Grid, Point, PointCloud, SensorModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direction through the centre of pixel `(v, u)`, written out from the
/// angular cell definition rather than taken from the library.
pub fn cell_center(s: &SensorModel, v: usize, u: usize) -> [f64; 3] {
    let yaw = PI - 2.0 * PI * (u as f64 + 0.5) / s.width as f64;
    let pitch_deg = s.fov_up - s.fov_total * (v as f64 + 0.5) / s.height as f64;
    let pitch = pitch_deg * PI / 180.0;
    [pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin()]
}

/// Fractional image coordinates `(row, col)` of a direction, before flooring.
pub fn cell_coords(s: &SensorModel, p: [f64; 3]) -> (f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let yaw = p[1].atan2(p[0]);
    let pitch_deg = (p[2] / r).asin() * 180.0 / PI;
    let col = (PI - yaw) / (2.0 * PI) * s.width as f64;
    let row = (s.fov_up - pitch_deg) / s.fov_total * s.height as f64;
    (row, col)
}

/// Pixel of a point by the oracle formula, plus its distance to the nearest
/// cell edge in pixels (small values mean the floor is numerically ambiguous).
pub fn oracle_pixel(s: &SensorModel, p: [f64; 3]) -> ((usize, usize), f64) {
    let (row, col) = cell_coords(s, p);
    let edge = |x: f64| (x - x.round()).abs();
    let u = (col.floor() as i64).rem_euclid(s.width as i64) as usize;
    let v = row.floor().clamp(0.0, (s.height - 1) as f64) as usize;
    let row_edge = if row < 0.0 || row >= s.height as f64 {
        f64::INFINITY
    } else {
        edge(row)
    };
    ((v, u), edge(col).min(row_edge))
}

/// A scan with one return per pixel centre, at range `range(v, u)`, for
/// every pixel where it returns `Some`.
pub fn pixel_scan(s: &SensorModel, range: impl Fn(usize, usize) -> Option<f64>) -> PointCloud {
    let mut pts = Vec::new();
    for v in 0..s.height {
        for u in 0..s.width {
            if let Some(r) = range(v, u) {
                let d = cell_center(s, v, u);
                let refl = 0.5 + 0.4 * ((u as f64) * 0.01).sin();
                pts.push(Point::new((d[0] * r) as f32, (d[1] * r) as f32, (d[2] * r) as f32, refl as f32));
            }
        }
    }
    PointCloud::new(pts).unwrap()
}

/// Smooth street-like range profile.
pub fn scene_range(s: &SensorModel, v: usize, u: usize, phase: f64) -> f64 {
    let a = 2.0 * PI * u as f64 / s.width as f64;
    12.0 + 4.0 * (a + phase).sin() + 2.0 * (3.0 * a).cos() + 0.05 * v as f64
}

/// Random returns with directions spread over (and a little beyond) the
/// vertical field of view.
pub fn random_cloud(rng: &mut ChaCha8Rng, s: &SensorModel, n: usize) -> PointCloud {
    let fov_down = s.fov_up - s.fov_total;
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    while pts.len() < n {
        let k = rng.random_range(0..10);
        if k == 0 && !pts.is_empty() {
            // the same direction again, nearer, farther or at the same range
            let q = pts[rng.random_range(0..pts.len())];
            let f = [0.5f32, 1.0, 2.0][rng.random_range(0..3)];
            pts.push(Point::new(q.x * f, q.y * f, q.z * f, rng.random_range(0.0..1.0)));
            continue;
        }
        let yaw = rng.random_range(-PI..PI);
        let pitch = rng.random_range(fov_down - 3.0..s.fov_up + 3.0).to_radians();
        let r = rng.random_range(0.5..80.0);
        pts.push(Point::new(
            (r * pitch.cos() * yaw.cos()) as f32,
            (r * pitch.cos() * yaw.sin()) as f32,
            (r * pitch.sin()) as f32,
            rng.random_range(0.0..1.0),
        ));
    }
    PointCloud::new(pts).unwrap()
}

/// 8-connected components of the set pixels of `mask`, columns wrapping.
pub fn components(mask: &Grid<u8>) -> Vec<Vec<usize>> {
    let (h, w) = mask.dims();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    for start in 0..h * w {
        if mask.as_slice()[start] != 1 || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            let i = comp[k];
            k += 1;
            for n in neighbors8(h, w, i) {
                if mask.as_slice()[n] == 1 && !seen[n] {
                    seen[n] = true;
                    comp.push(n);
                }
            }
        }
        out.push(comp);
    }
    out
}

pub fn neighbors8(h: usize, w: usize, i: usize) -> Vec<usize> {
    let (v, u) = ((i / w) as i64, (i % w) as i64);
    let mut out = Vec::with_capacity(8);
    for dv in -1..=1 {
        for du in -1..=1 {
            if (dv, du) == (0, 0) {
                continue;
            }
            let vv = v + dv;
            if vv < 0 || vv >= h as i64 {
                continue;
            }
            let uu = (u + du).rem_euclid(w as i64);
            out.push(vv as usize * w + uu as usize);
        }
    }
    out
}
