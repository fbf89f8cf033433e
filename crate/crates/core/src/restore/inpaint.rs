//! Navier–Stokes style inpainting of thin holes.
//!
//! Holes are seeded with their nearest valid value, then evolved with
//! `I += dt * grad(lap I) . perp(grad I)` (smoothness transported along
//! isophotes), interleaving one edge-preserving diffusion step every
//! `diffusion_every` transport steps. The evolution runs on the image
//! normalized to [0, 1] over its valid pixels.
//!
//! Each transport update is limited to the range of the pixel's 3x3 known
//! neighbourhood and each diffusion update is a convex combination, so
//! repaired values never leave the range spanned by the valid pixels
//! bordering their hole.

use serde::{Deserialize, Serialize};

use super::fill::nearest_valid_sources;
use crate::error::{Error, Result};
use crate::grid::{ensure_dims, Grid};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintParams {
    pub dt: f64,
    pub diffusion_every: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            diffusion_every: 15,
            max_iters: 600,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintOutcome {
    pub image: Grid<f64>,
    /// Transport steps executed.
    pub iterations: usize,
    /// Largest per-pixel change over each transport+diffusion cycle, in
    /// units of the valid dynamic range.
    pub residuals: Vec<f64>,
}

impl InpaintOutcome {
    /// Whether the residual sequence never increases after the first cycle.
    pub fn residual_monotone(&self) -> bool {
        self.residuals.windows(2).skip(1).all(|w| w[1] <= w[0])
    }
}

/// Edge-stopping scale of the diffusion conductance, in normalized units.
const CONDUCTANCE_K: f64 = 0.1;
/// Explicit 4-neighbour diffusion is a convex update up to this step.
const MAX_DIFFUSION_DT: f64 = 0.25;

pub fn inpaint_ns(
    image: &Grid<f64>,
    repair: &Grid<u8>,
    valid: &Grid<u8>,
    params: &InpaintParams,
) -> Result<InpaintOutcome> {
    ensure_dims(image, repair, "image vs repair mask")?;
    ensure_dims(image, valid, "image vs valid mask")?;
    let overlap = repair
        .iter()
        .zip(valid.iter())
        .filter(|(&r, &v)| r == 1 && v == 1)
        .count();
    if overlap > 0 {
        return Err(Error::MaskOverlap(overlap));
    }
    if !(params.dt > 0.0) || params.diffusion_every == 0 {
        return Err(Error::InvalidValue(format!("bad inpaint parameters {params:?}")));
    }

    let holes: Vec<usize> = (0..repair.len())
        .filter(|&i| repair.as_slice()[i] == 1)
        .collect();
    let mut out = image.clone();
    if holes.is_empty() {
        return Ok(InpaintOutcome {
            image: out,
            iterations: 0,
            residuals: Vec::new(),
        });
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (x, &m) in image.iter().zip(valid.iter()) {
        if m == 1 {
            if !x.is_finite() {
                return Err(Error::InvalidValue(format!("non-finite valid value {x}")));
            }
            lo = lo.min(*x);
            hi = hi.max(*x);
        }
    }
    let sources = nearest_valid_sources(valid, repair)?;
    for &i in &holes {
        let src = sources.as_slice()[i].expect("every hole has a source");
        out.as_mut_slice()[i] = image.as_slice()[src];
    }
    let span = hi - lo;
    if span == 0.0 {
        return Ok(InpaintOutcome {
            image: out,
            iterations: 0,
            residuals: Vec::new(),
        });
    }

    let solver = Solver::new(repair, valid, &holes);
    let mut field: Vec<f64> = out.iter().map(|x| (x - lo) / span).collect();
    let mut next = field.clone();
    let mut lap = vec![0.0; field.len()];
    let mut cycle_start: Vec<f64> = holes.iter().map(|&i| field[i]).collect();
    let mut residuals = Vec::new();
    let mut iterations = 0;
    let diffusion_dt = params.dt.min(MAX_DIFFUSION_DT);

    while iterations < params.max_iters {
        solver.transport(&field, &mut next, &mut lap, params.dt);
        std::mem::swap(&mut field, &mut next);
        iterations += 1;
        if iterations % params.diffusion_every == 0 {
            solver.diffuse(&field, &mut next, diffusion_dt);
            std::mem::swap(&mut field, &mut next);
            let res = holes
                .iter()
                .zip(&cycle_start)
                .map(|(&i, s)| (field[i] - s).abs())
                .fold(0.0, f64::max);
            residuals.push(res);
            for (s, &i) in cycle_start.iter_mut().zip(&holes) {
                *s = field[i];
            }
            if res < params.tol {
                break;
            }
        }
    }

    let o = out.as_mut_slice();
    for &i in &holes {
        o[i] = lo + span * field[i];
    }
    let monotone = residuals.windows(2).skip(1).all(|w| w[1] <= w[0]);
    if !monotone {
        log::debug!("inpaint residual not monotone over {} cycles", residuals.len());
    }
    Ok(InpaintOutcome {
        image: out,
        iterations,
        residuals,
    })
}

struct Solver<'a> {
    h: usize,
    w: usize,
    known: Vec<bool>,
    holes: &'a [usize],
    /// Pixels whose Laplacian feeds a hole's transport term.
    lap_sites: Vec<usize>,
    is_hole: Vec<bool>,
}

impl<'a> Solver<'a> {
    fn new(repair: &Grid<u8>, valid: &Grid<u8>, holes: &'a [usize]) -> Self {
        let (h, w) = repair.dims();
        let known: Vec<bool> = repair
            .iter()
            .zip(valid.iter())
            .map(|(&r, &v)| r == 1 || v == 1)
            .collect();
        let mut is_hole = vec![false; h * w];
        holes.iter().for_each(|&i| is_hole[i] = true);
        let mut site = vec![false; h * w];
        let mut s = Solver {
            h,
            w,
            known,
            holes,
            lap_sites: Vec::new(),
            is_hole,
        };
        for &i in holes {
            site[i] = true;
            for n in s.neighbors4(i).into_iter().flatten() {
                if s.known[n] {
                    site[n] = true;
                }
            }
        }
        s.lap_sites = (0..h * w).filter(|&i| site[i]).collect();
        s
    }

    /// Left, right, up, down; `None` above the first and below the last row.
    #[inline]
    fn neighbors4(&self, i: usize) -> [Option<usize>; 4] {
        let (v, u) = (i / self.w, i % self.w);
        let row = v * self.w;
        [
            Some(row + (u + self.w - 1) % self.w),
            Some(row + (u + 1) % self.w),
            (v > 0).then(|| i - self.w),
            (v + 1 < self.h).then(|| i + self.w),
        ]
    }

    /// Value at neighbour `n` if known, otherwise `fallback`.
    #[inline]
    fn at(&self, f: &[f64], n: Option<usize>, fallback: f64) -> f64 {
        match n {
            Some(n) if self.known[n] => f[n],
            _ => fallback,
        }
    }

    fn transport(&self, field: &[f64], next: &mut [f64], lap: &mut [f64], dt: f64) {
        let laps = par::map(&self.lap_sites, |&i| {
            let c = field[i];
            let [l, r, u, d] = self.neighbors4(i);
            self.at(field, l, c) + self.at(field, r, c) + self.at(field, u, c) + self.at(field, d, c)
                - 4.0 * c
        });
        for (&i, x) in self.lap_sites.iter().zip(laps) {
            lap[i] = x;
        }
        let lap = &*lap;
        let updates = par::map(self.holes, |&i| {
            let c = field[i];
            let [l, r, u, d] = self.neighbors4(i);
            let lc = lap[i];
            let lx = 0.5 * (self.at(lap, r, lc) - self.at(lap, l, lc));
            let ly = 0.5 * (self.at(lap, d, lc) - self.at(lap, u, lc));
            let ix = 0.5 * (self.at(field, r, c) - self.at(field, l, c));
            let iy = 0.5 * (self.at(field, d, c) - self.at(field, u, c));
            let raw = c + dt * (lx * -iy + ly * ix);
            let (lo, hi) = self.local_bounds(field, i);
            raw.clamp(lo, hi)
        });
        next.copy_from_slice(field);
        for (&i, x) in self.holes.iter().zip(updates) {
            next[i] = x;
        }
    }

    /// Min and max of the known values in the 3x3 neighbourhood of `i`.
    fn local_bounds(&self, field: &[f64], i: usize) -> (f64, f64) {
        let (v, u) = (i / self.w, i % self.w);
        let mut lo = field[i];
        let mut hi = field[i];
        for dv in -1i64..=1 {
            let vv = v as i64 + dv;
            if vv < 0 || vv >= self.h as i64 {
                continue;
            }
            for du in [self.w - 1, 0, 1] {
                let n = vv as usize * self.w + (u + du) % self.w;
                if self.known[n] {
                    lo = lo.min(field[n]);
                    hi = hi.max(field[n]);
                }
            }
        }
        (lo, hi)
    }

    fn diffuse(&self, field: &[f64], next: &mut [f64], dt: f64) {
        let updates = par::map(self.holes, |&i| {
            let c = field[i];
            let flux: f64 = self
                .neighbors4(i)
                .into_iter()
                .flatten()
                .filter(|&n| self.known[n])
                .map(|n| {
                    let d = field[n] - c;
                    d / (1.0 + (d / CONDUCTANCE_K).powi(2))
                })
                .sum();
            c + dt * flux
        });
        next.copy_from_slice(field);
        for (&i, x) in self.holes.iter().zip(updates) {
            debug_assert!(self.is_hole[i]);
            next[i] = x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stripe(h: usize, w: usize, col: usize) -> (Grid<u8>, Grid<u8>) {
        let repair = Grid::from_fn(h, w, |_, u| (u == col) as u8);
        let valid = repair.map(|&r| 1 - r);
        (repair, valid)
    }

    #[test]
    fn constant_image_is_preserved() {
        let (repair, valid) = stripe(8, 16, 5);
        let img = Grid::from_fn(8, 16, |_, u| if u == 5 { 0.0 } else { 5.0 });
        let out = inpaint_ns(&img, &repair, &valid, &InpaintParams::default()).unwrap();
        assert!(out.image.iter().all(|&x| x == 5.0));
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn ramp_is_recovered() {
        let (h, w) = (16, 64);
        let (repair, valid) = stripe(h, w, 20);
        let truth = Grid::from_fn(h, w, |_, u| 0.05 * u as f64);
        let mut img = truth.clone();
        for v in 0..h {
            img[(v, 20)] = -100.0;
        }
        let out = inpaint_ns(&img, &repair, &valid, &InpaintParams::default()).unwrap();
        for v in 0..h {
            assert!((out.image[(v, 20)] - truth[(v, 20)]).abs() < 1e-3, "row {v}: {}", out.image[(v, 20)]);
        }
    }

    #[test]
    fn outside_pixels_untouched() {
        let (repair, valid) = stripe(6, 12, 3);
        let img = Grid::from_fn(6, 12, |v, u| ((v * 7 + u * 3) % 5) as f64 * 0.37);
        let out = inpaint_ns(&img, &repair, &valid, &InpaintParams::default()).unwrap();
        for i in 0..img.len() {
            if repair.as_slice()[i] == 0 {
                assert_eq!(out.image.as_slice()[i].to_bits(), img.as_slice()[i].to_bits());
            }
        }
    }

    #[test]
    fn overlap_rejected() {
        let (repair, _) = stripe(4, 8, 2);
        let valid = Grid::filled(4, 8, 1u8);
        let img = Grid::filled(4, 8, 0.0);
        assert!(matches!(
            inpaint_ns(&img, &repair, &valid, &InpaintParams::default()),
            Err(Error::MaskOverlap(4))
        ));
    }
}
