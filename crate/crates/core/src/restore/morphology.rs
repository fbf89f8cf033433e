//! Binary dilation/erosion with a rectangular all-ones structuring element.
//!
//! Out-of-image samples count as 0 for dilation and 1 for erosion, i.e. they
//! never contribute. Both operators are separable, so each runs as a row
//! pass followed by a column pass.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub(crate) fn check_kernel(kh: usize, kw: usize) -> Result<()> {
    if kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::Kernel(kh, kw));
    }
    Ok(())
}

pub fn dilate(mask: &Grid<u8>, kh: usize, kw: usize) -> Result<Grid<u8>> {
    check_kernel(kh, kw)?;
    Ok(separable(mask, kh / 2, kw / 2, |a, b| a.max(b), 0))
}

pub fn erode(mask: &Grid<u8>, kh: usize, kw: usize) -> Result<Grid<u8>> {
    check_kernel(kh, kw)?;
    Ok(separable(mask, kh / 2, kw / 2, |a, b| a.min(b), 1))
}

/// Dilation followed by erosion.
pub fn close(mask: &Grid<u8>, kh: usize, kw: usize) -> Result<Grid<u8>> {
    erode(&dilate(mask, kh, kw)?, kh, kw)
}

fn separable(mask: &Grid<u8>, rh: usize, rw: usize, op: impl Fn(u8, u8) -> u8, id: u8) -> Grid<u8> {
    let (h, w) = mask.dims();
    let binary = |x: u8| (x != 0) as u8;
    let rows = Grid::from_fn(h, w, |v, u| {
        let lo = u.saturating_sub(rw);
        let hi = (u + rw).min(w - 1);
        (lo..=hi).fold(id, |acc, uu| op(acc, binary(mask[(v, uu)])))
    });
    Grid::from_fn(h, w, |v, u| {
        let lo = v.saturating_sub(rh);
        let hi = (v + rh).min(h - 1);
        (lo..=hi).fold(id, |acc, vv| op(acc, rows[(vv, u)]))
    })
}
