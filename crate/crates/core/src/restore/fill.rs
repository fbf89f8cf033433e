//! Exact Euclidean nearest-valid-pixel search.
//!
//! Squared distances come from a separable distance transform (vertical
//! scan, then a lower envelope of parabolas per row). For each target the
//! source is then recovered by walking candidate rows top to bottom, so among
//! equidistant sources the lexicographically smallest `(row, col)` wins.

use crate::error::{Error, Result};
use crate::grid::{ensure_dims, Grid};
use crate::par;

const INF: i64 = i64::MAX / 4;

/// Squared distance from every pixel to the nearest pixel with `valid == 1`.
fn squared_edt(valid: &Grid<u8>) -> Vec<i64> {
    let (h, w) = valid.dims();
    // vertical pass
    let mut g = vec![INF; h * w];
    for u in 0..w {
        let mut last: Option<usize> = None;
        for v in 0..h {
            if valid[(v, u)] == 1 {
                last = Some(v);
            }
            if let Some(l) = last {
                g[v * w + u] = ((v - l) * (v - l)) as i64;
            }
        }
        let mut next: Option<usize> = None;
        for v in (0..h).rev() {
            if valid[(v, u)] == 1 {
                next = Some(v);
            }
            if let Some(n) = next {
                let d = ((n - v) * (n - v)) as i64;
                if d < g[v * w + u] {
                    g[v * w + u] = d;
                }
            }
        }
    }
    // horizontal pass: lower envelope of parabolas (c - q)^2 + g[q]
    let mut d = vec![INF; h * w];
    par::for_each_row(&mut d, w, |v, out| {
        let row = &g[v * w..(v + 1) * w];
        let mut apex: Vec<usize> = Vec::with_capacity(w);
        let mut start: Vec<f64> = Vec::with_capacity(w);
        let inter = |p: usize, q: usize| -> f64 {
            let (fp, fq) = (row[p] as f64, row[q] as f64);
            ((fq + (q * q) as f64) - (fp + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
        };
        for q in 0..w {
            if row[q] >= INF {
                continue;
            }
            while let Some(&p) = apex.last() {
                let s = inter(p, q);
                if s <= *start.last().unwrap() {
                    apex.pop();
                    start.pop();
                } else {
                    start.push(s);
                    break;
                }
            }
            if apex.is_empty() {
                start.clear();
                start.push(f64::NEG_INFINITY);
            }
            apex.push(q);
        }
        if apex.is_empty() {
            return;
        }
        let mut k = 0;
        for (c, o) in out.iter_mut().enumerate() {
            while k + 1 < apex.len() && start[k + 1] < c as f64 {
                k += 1;
            }
            let q = apex[k];
            let dc = c as i64 - q as i64;
            // envelope boundaries are fractional; resolve both neighbours exactly
            let mut best = dc * dc + row[q];
            if k + 1 < apex.len() {
                let q2 = apex[k + 1];
                let dc2 = c as i64 - q2 as i64;
                best = best.min(dc2 * dc2 + row[q2]);
            }
            *o = best;
        }
    });
    d
}

fn isqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// For every pixel with `target == 1`, the offset of its nearest valid pixel.
/// Other pixels map to `None`.
pub fn nearest_valid_sources(valid: &Grid<u8>, target: &Grid<u8>) -> Result<Grid<Option<usize>>> {
    ensure_dims(valid, target, "valid vs target mask")?;
    if !valid.iter().any(|&m| m == 1) {
        return Err(Error::NoValidPixel);
    }
    let (h, w) = valid.dims();
    let dist = squared_edt(valid);
    let mut out: Vec<Option<usize>> = vec![None; h * w];
    par::for_each_row(&mut out, w, |v, row| {
        for (u, o) in row.iter_mut().enumerate() {
            if target[(v, u)] != 1 {
                continue;
            }
            let d = dist[v * w + u];
            let reach = isqrt(d) as usize;
            let (lo, hi) = (v.saturating_sub(reach), (v + reach).min(h - 1));
            for r in lo..=hi {
                let dr = r as i64 - v as i64;
                let rem = d - dr * dr;
                if rem < 0 {
                    continue;
                }
                let dc = isqrt(rem);
                if dc * dc != rem {
                    continue;
                }
                let dc = dc as usize;
                if u >= dc && valid[(r, u - dc)] == 1 {
                    *o = Some(r * w + u - dc);
                    break;
                }
                if u + dc < w && valid[(r, u + dc)] == 1 {
                    *o = Some(r * w + u + dc);
                    break;
                }
            }
            debug_assert!(o.is_some(), "distance transform and search disagree at ({v},{u})");
        }
    });
    Grid::from_vec(h, w, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_on_a_row() {
        let valid = Grid::from_vec(1, 5, vec![1, 0, 0, 1, 1]).unwrap();
        assert_eq!(squared_edt(&valid), vec![0, 1, 1, 0, 0]);
    }

    #[test]
    fn isqrt_exact() {
        for n in 0..2000 {
            let r = isqrt(n);
            assert!(r * r <= n && (r + 1) * (r + 1) > n);
        }
    }

    #[test]
    fn lexicographic_tie() {
        // target (1,1) is equidistant to (0,1), (1,0), (1,2), (2,1)
        let valid = Grid::from_vec(3, 3, vec![0, 1, 0, 1, 0, 1, 0, 1, 0]).unwrap();
        let target = Grid::from_vec(3, 3, vec![0, 0, 0, 0, 1, 0, 0, 0, 0]).unwrap();
        let src = nearest_valid_sources(&valid, &target).unwrap();
        assert_eq!(src[(1, 1)], Some(1));
    }

    #[test]
    fn empty_valid_is_error() {
        let z = Grid::filled(2, 2, 0u8);
        assert!(matches!(nearest_valid_sources(&z, &z), Err(Error::NoValidPixel)));
    }
}
