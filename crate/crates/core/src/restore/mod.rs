//! Stripe-artifact repair.
//!
//! Beam dropouts and projection aliasing leave one-pixel-wide gaps in the
//! validity mask. A morphological closing of the mask minus the mask itself
//! localizes them; range and reflectivity are then inpainted, coordinates
//! re-synthesized along each pixel's ray, and labels copied from the nearest
//! valid pixel.

mod fill;
mod inpaint;
pub mod morphology;

pub use fill::nearest_valid_sources;
pub use inpaint::{inpaint_ns, InpaintOutcome, InpaintParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_dims, Grid};
use crate::projection::pixel_ray;
use crate::types::{LabelImage, RangeImageStack, SensorModel};

/// Pixels to repair (1). Never overlaps the validity mask it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeMask(Grid<u8>);

impl StripeMask {
    pub fn new(values: Grid<u8>, valid: &Grid<u8>) -> Result<Self> {
        ensure_dims(&values, valid, "stripe vs valid mask")?;
        let overlap = values
            .iter()
            .zip(valid.iter())
            .filter(|(&s, &m)| s != 0 && m == 1)
            .count();
        if overlap > 0 {
            return Err(Error::MaskOverlap(overlap));
        }
        Ok(Self(values.map(|&s| (s != 0) as u8)))
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&s| s == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn into_grid(self) -> Grid<u8> {
        self.0
    }
}

/// `close(mask) AND NOT mask` with a `kernel[0] x kernel[1]` structuring element.
pub fn locate_stripes(mask: &Grid<u8>, kernel: [usize; 2]) -> Result<StripeMask> {
    let closed = morphology::close(mask, kernel[0], kernel[1])?;
    let stripes = Grid::from_vec(
        mask.height(),
        mask.width(),
        closed
            .iter()
            .zip(mask.iter())
            .map(|(&c, &m)| (c == 1 && m == 0) as u8)
            .collect(),
    )?;
    Ok(StripeMask(stripes))
}

/// Copies into each repair pixel the label of its nearest valid pixel
/// (exact Euclidean distance, ties to the smallest `(row, col)`).
pub fn fill_labels_nn(labels: &LabelImage, repair: &StripeMask, valid: &Grid<u8>) -> Result<LabelImage> {
    ensure_dims(labels.labels(), valid, "labels vs valid mask")?;
    let sources = nearest_valid_sources(valid, repair.grid())?;
    let src = labels.labels();
    let filled = Grid::from_vec(
        src.height(),
        src.width(),
        src.iter()
            .zip(sources.iter())
            .map(|(&l, s)| s.map_or(l, |i| src.as_slice()[i]))
            .collect(),
    )?;
    LabelImage::new(filled, labels.num_classes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairParams {
    pub kernel: [usize; 2],
    pub inpaint: InpaintParams,
    pub fill_labels: bool,
}

impl Default for RepairParams {
    fn default() -> Self {
        Self {
            kernel: [3, 3],
            inpaint: InpaintParams::default(),
            fill_labels: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Repaired {
    pub stack: RangeImageStack,
    pub labels: Option<LabelImage>,
    pub stripes: StripeMask,
    pub range_iterations: usize,
}

/// Locates stripes on the validity mask and repairs every channel there.
///
/// Repaired pixels become valid and synthetic: positive range, coordinates
/// on the pixel-center ray, index -1. Normals are left untouched; run
/// [`crate::surface::estimate_normals`] afterwards.
pub fn repair_stack(
    stack: &RangeImageStack,
    labels: Option<&LabelImage>,
    sensor: &SensorModel,
    params: &RepairParams,
) -> Result<Repaired> {
    stack.check_dims()?;
    if stack.dims() != (sensor.height, sensor.width) {
        return Err(Error::Shape(format!(
            "stack {:?} vs sensor {}x{}",
            stack.dims(),
            sensor.height,
            sensor.width
        )));
    }
    if let Some(l) = labels {
        ensure_dims(l.labels(), &stack.mask, "labels vs stack")?;
    }
    let stripes = locate_stripes(&stack.mask, params.kernel)?;
    if stripes.is_empty() {
        return Ok(Repaired {
            stack: stack.clone(),
            labels: labels.cloned(),
            stripes,
            range_iterations: 0,
        });
    }

    let range = inpaint_ns(&stack.range, stripes.grid(), &stack.mask, &params.inpaint)?;
    let refl = inpaint_ns(&stack.reflectivity, stripes.grid(), &stack.mask, &params.inpaint)?;

    let mut out = stack.clone();
    out.range = range.image;
    out.reflectivity = refl.image;
    let (h, w) = stack.dims();
    for v in 0..h {
        for u in 0..w {
            if stripes.grid()[(v, u)] != 1 {
                continue;
            }
            let r = out.range[(v, u)];
            let d = pixel_ray(sensor, v, u);
            out.coords[(v, u)] = [d[0] * r, d[1] * r, d[2] * r];
            out.reflectivity[(v, u)] = out.reflectivity[(v, u)].clamp(0.0, 1.0);
            out.mask[(v, u)] = 1;
            out.synthetic[(v, u)] = 1;
            out.index[(v, u)] = -1;
        }
    }

    let labels = match labels {
        Some(l) if params.fill_labels => Some(fill_labels_nn(l, &stripes, &stack.mask)?),
        Some(l) => Some(l.clone()),
        None => None,
    };
    Ok(Repaired {
        stack: out,
        labels,
        stripes,
        range_iterations: range.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_mask_has_no_stripes() {
        let m = Grid::filled(5, 7, 1u8);
        assert!(locate_stripes(&m, [3, 3]).unwrap().is_empty());
    }

    #[test]
    fn single_gap_in_row() {
        let m = Grid::from_vec(1, 5, vec![1, 0, 1, 1, 1]).unwrap();
        let s = locate_stripes(&m, [1, 3]).unwrap();
        assert_eq!(s.grid().as_slice(), &[0, 1, 0, 0, 0]);
    }

    #[test]
    fn large_empty_block_is_kept() {
        let m = Grid::from_fn(20, 20, |v, u| !((5..15).contains(&v) && (5..15).contains(&u)) as u8);
        assert!(locate_stripes(&m, [3, 3]).unwrap().is_empty());
    }

    #[test]
    fn even_kernel_rejected() {
        let m = Grid::filled(3, 3, 1u8);
        assert!(matches!(locate_stripes(&m, [2, 3]), Err(Error::Kernel(2, 3))));
    }

    #[test]
    fn row_label_fill() {
        let labels = LabelImage::new(Grid::from_vec(1, 5, vec![2, 0, 0, 3, 3]).unwrap(), 4).unwrap();
        let valid = Grid::from_vec(1, 5, vec![1, 0, 0, 1, 1]).unwrap();
        let repair = StripeMask::new(Grid::from_vec(1, 5, vec![0, 1, 1, 0, 0]).unwrap(), &valid).unwrap();
        let out = fill_labels_nn(&labels, &repair, &valid).unwrap();
        assert_eq!(out.labels().as_slice(), &[2, 2, 3, 3, 3]);
    }

    #[test]
    fn single_valid_pixel_floods() {
        let mut labels = Grid::filled(6, 9, 0u32);
        labels[(4, 2)] = 5;
        let valid = labels.map(|&l| (l != 0) as u8);
        let repair = StripeMask::new(valid.map(|&m| 1 - m), &valid).unwrap();
        let out = fill_labels_nn(&LabelImage::new(labels, 6).unwrap(), &repair, &valid).unwrap();
        assert!(out.labels().iter().all(|&l| l == 5));
    }

    #[test]
    fn stripe_mask_must_not_overlap() {
        let valid = Grid::filled(2, 2, 1u8);
        assert!(matches!(StripeMask::new(valid.clone(), &valid), Err(Error::MaskOverlap(4))));
    }
}
