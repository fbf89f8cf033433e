//! Boundary maps: exact ones from hard labels, and a Laplacian edge response
//! for soft class scores.

use crate::error::{Error, Result};
use crate::grid::{ensure_dims, Grid};
use crate::par;
use crate::types::{BoundaryMap, ClassProbs, LabelImage};
use crate::IGNORE_LABEL;

/// 1 where a valid, labelled pixel has a valid, labelled 4-neighbour of a
/// different class. Columns wrap; rows do not.
pub fn boundaries_from_labels(labels: &LabelImage, valid: &Grid<u8>) -> Result<BoundaryMap> {
    let grid = labels.labels();
    ensure_dims(grid, valid, "labels vs valid mask")?;
    let (h, w) = grid.dims();
    let scored = |v: usize, u: usize| valid[(v, u)] == 1 && grid[(v, u)] != IGNORE_LABEL;
    let mut out = vec![0.0; h * w];
    par::for_each_row(&mut out, w, |v, row| {
        for (u, o) in row.iter_mut().enumerate() {
            if !scored(v, u) {
                continue;
            }
            let me = grid[(v, u)];
            let mut nb = vec![(v, (u + w - 1) % w), (v, (u + 1) % w)];
            if v > 0 {
                nb.push((v - 1, u));
            }
            if v + 1 < h {
                nb.push((v + 1, u));
            }
            if nb.into_iter().any(|(vv, uu)| scored(vv, uu) && grid[(vv, uu)] != me) {
                *o = 1.0;
            }
        }
    });
    BoundaryMap::new(Grid::from_vec(h, w, out)?)
}

/// Clamped L2-over-classes response of the 5-point Laplacian; columns wrap,
/// rows replicate at the image edge. Scores must be normalized per pixel.
pub fn laplacian_edge(probs: &ClassProbs) -> Result<BoundaryMap> {
    probs.check_normalized(1e-5)?;
    let (_, energy) = laplacian_energy(probs);
    let values = energy.iter().map(|&s| s.sqrt().min(1.0)).collect();
    BoundaryMap::new(Grid::from_vec(probs.height(), probs.width(), values)?)
}

/// Per-class Laplacian responses (pixel-major, like the input) and their
/// per-pixel sum of squares. No normalization check.
pub(crate) fn laplacian_energy(probs: &ClassProbs) -> (Vec<f64>, Vec<f64>) {
    let (h, w, c) = (probs.height(), probs.width(), probs.classes());
    let p = probs.as_slice();
    let mut lap = vec![0.0; h * w * c];
    par::for_each_row(&mut lap, w * c, |v, row| {
        let up = v.saturating_sub(1);
        let down = (v + 1).min(h - 1);
        for u in 0..w {
            let (l, r) = ((u + w - 1) % w, (u + 1) % w);
            for k in 0..c {
                let at = |vv: usize, uu: usize| p[(vv * w + uu) * c + k];
                row[u * c + k] =
                    4.0 * at(v, u) - at(v, l) - at(v, r) - at(up, u) - at(down, u);
            }
        }
    });
    let energy = lap.chunks_exact(c).map(|px| px.iter().map(|x| x * x).sum()).collect();
    (lap, energy)
}

/// Offsets of the pixels whose Laplacian involves pixel `(v, u)`, with the
/// stencil weight `d L(target) / d p(v, u)` for each.
pub(crate) fn laplacian_adjoint(h: usize, w: usize, v: usize, u: usize) -> Vec<(usize, f64)> {
    // Each target pixel t uses (t, left, right, up-or-self, down-or-self).
    // Accumulate weights per target so replicated edges fold correctly.
    let mut acc: Vec<(usize, f64)> = Vec::with_capacity(5);
    let mut add = |t: usize, wgt: f64| match acc.iter_mut().find(|(i, _)| *i == t) {
        Some(e) => e.1 += wgt,
        None => acc.push((t, wgt)),
    };
    let me = v * w + u;
    add(me, 4.0);
    add(v * w + (u + 1) % w, -1.0); // we are its left neighbour
    add(v * w + (u + w - 1) % w, -1.0); // we are its right neighbour
    if v + 1 < h {
        add((v + 1) * w + u, -1.0); // we are its up neighbour
    } else {
        add(me, -1.0); // our own down neighbour is replicated self
    }
    if v > 0 {
        add((v - 1) * w + u, -1.0);
    } else {
        add(me, -1.0);
    }
    acc
}

pub(crate) fn check_same_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}
