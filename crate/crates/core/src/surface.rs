//! Normal map from the projected coordinate channel.
//!
//! Tangents are central differences of neighbouring coordinates, azimuth
//! wrapping modulo the width; the normal is their normalized cross product,
//! oriented toward the sensor. Pixels without all four neighbours valid, the
//! top and bottom rows, and degenerate cross products get a zero normal.

use crate::error::Result;
use crate::par;
use crate::types::RangeImageStack;

const DEGENERATE: f64 = 1e-12;

pub fn estimate_normals(stack: &RangeImageStack) -> Result<RangeImageStack> {
    stack.check_dims()?;
    let mut out = stack.clone();
    out.normals = crate::grid::Grid::filled(stack.height(), stack.width(), [0.0; 3]);
    fill_normals(stack, out.normals.as_mut_slice());
    Ok(out)
}

fn fill_normals(stack: &RangeImageStack, normals: &mut [[f64; 3]]) {
    let (h, w) = stack.dims();
    let coords = stack.coords.as_slice();
    let mask = stack.mask.as_slice();
    par::for_each_row(normals, w, |v, row| {
        if v == 0 || v + 1 >= h {
            return;
        }
        let at = |vv: usize, uu: usize| vv * w + uu;
        for (u, n) in row.iter_mut().enumerate() {
            let (l, r) = ((u + w - 1) % w, (u + 1) % w);
            let nb = [at(v, l), at(v, r), at(v - 1, u), at(v + 1, u)];
            if mask[at(v, u)] != 1 || nb.iter().any(|&i| mask[i] != 1) {
                continue;
            }
            let tu = sub(coords[nb[1]], coords[nb[0]]);
            let tv = sub(coords[nb[3]], coords[nb[2]]);
            let c = cross(tu, tv);
            let len = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            if !(len >= DEGENERATE) {
                continue;
            }
            let mut unit = [c[0] / len, c[1] / len, c[2] / len];
            let p = coords[at(v, u)];
            if unit[0] * p[0] + unit[1] * p[1] + unit[2] * p[2] > 0.0 {
                unit = [-unit[0], -unit[1], -unit[2]];
            }
            *n = unit;
        }
    });
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::pixel_ray;
    use crate::types::{validate_stack, SensorModel};

    /// Stack whose pixel (v, u) holds the point `f(v, u, ray)` when it returns Some.
    fn synthetic(s: &SensorModel, f: impl Fn([f64; 3]) -> Option<f64>) -> RangeImageStack {
        let mut st = RangeImageStack::empty(s.height, s.width);
        let mut next = 0;
        for v in 0..s.height {
            for u in 0..s.width {
                let d = pixel_ray(s, v, u);
                if let Some(r) = f(d) {
                    let p = [d[0] * r, d[1] * r, d[2] * r];
                    st.coords[(v, u)] = p;
                    st.range[(v, u)] = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    st.mask[(v, u)] = 1;
                    st.index[(v, u)] = next;
                    next += 1;
                }
            }
        }
        st
    }

    #[test]
    fn sphere_normals_are_radial() {
        let s = SensorModel::new("t", 32, 256, 15.0, 30.0).unwrap();
        let r = 12.0;
        let st = estimate_normals(&synthetic(&s, |_| Some(r))).unwrap();
        assert!(validate_stack(&st).is_empty());
        for v in 1..s.height - 1 {
            for u in 0..s.width {
                let n = st.normals[(v, u)];
                let c = st.coords[(v, u)];
                for k in 0..3 {
                    assert!((n[k] + c[k] / r).abs() < 1e-3, "({v},{u}) {n:?} vs {c:?}");
                }
            }
        }
    }

    #[test]
    fn wall_normals_face_sensor() {
        let s = SensorModel::new("t", 32, 256, 15.0, 30.0).unwrap();
        let st = synthetic(&s, |d| (d[0] > 0.3).then(|| 5.0 / d[0]));
        let st = estimate_normals(&st).unwrap();
        let mut checked = 0;
        for v in 1..s.height - 1 {
            for u in 0..s.width {
                let n = st.normals[(v, u)];
                if n != [0.0; 3] {
                    assert!((n[0] + 1.0).abs() < 1e-3 && n[1].abs() < 1e-3 && n[2].abs() < 1e-3);
                    checked += 1;
                }
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn invalid_neighbor_gives_zero() {
        let s = SensorModel::new("t", 8, 16, 15.0, 30.0).unwrap();
        let mut st = synthetic(&s, |_| Some(3.0));
        st.mask[(4, 5)] = 0;
        st.index[(4, 5)] = -1;
        st.range[(4, 5)] = 0.0;
        let out = estimate_normals(&st).unwrap();
        for (v, u) in [(4, 4), (4, 6), (3, 5), (5, 5), (4, 5), (0, 3), (7, 3)] {
            assert_eq!(out.normals[(v, u)], [0.0; 3], "({v},{u})");
        }
        assert_ne!(out.normals[(2, 2)], [0.0; 3]);
    }

    #[test]
    fn degenerate_cross_is_zero() {
        // every point identical → zero tangents
        let s = SensorModel::new("t", 4, 8, 15.0, 30.0).unwrap();
        let mut st = synthetic(&s, |_| Some(1.0));
        for c in st.coords.as_mut_slice() {
            *c = [1.0, 0.0, 0.0];
        }
        st.range = st.range.map(|_| 1.0);
        let out = estimate_normals(&st).unwrap();
        assert!(out.normals.iter().all(|n| *n == [0.0; 3]));
    }
}
