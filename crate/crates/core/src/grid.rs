//! Dense row-major 2-D storage shared by every image-like type.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Columns `u0..u0 + width` of every row.
    pub fn crop_columns(&self, u0: usize, width: usize) -> Result<Self> {
        if u0 + width > self.width || width == 0 {
            return Err(Error::Shape(format!(
                "crop {u0}..{} outside width {}",
                u0 + width,
                self.width
            )));
        }
        let mut data = Vec::with_capacity(self.height * width);
        for row in self.rows() {
            data.extend_from_slice(&row[u0..u0 + width]);
        }
        Ok(Self {
            height: self.height,
            width,
            data,
        })
    }
}

impl<T> Grid<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {height}x{width} grid",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for v in 0..height {
            for u in 0..width {
                data.push(f(v, u));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, v: usize, u: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn get(&self, v: usize, u: usize) -> &T {
        &self.data[v * self.width + u]
    }

    /// Column index `u + du` wrapped modulo the width.
    #[inline]
    pub fn wrap_col(&self, u: usize, du: isize) -> usize {
        (u as isize + du).rem_euclid(self.width as isize) as usize
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.width.max(1))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<R>(&self, f: impl FnMut(&T) -> R) -> Grid<R> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<R>(&self, other: &Grid<R>) -> bool {
        self.dims() == other.dims()
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (v, u): (usize, usize)) -> &T {
        &self.data[v * self.width + u]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (v, u): (usize, usize)) -> &mut T {
        &mut self.data[v * self.width + u]
    }
}

pub(crate) fn ensure_dims<A, B>(a: &Grid<A>, b: &Grid<B>, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "{what}: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_keeps_rows() {
        let g = Grid::from_fn(2, 5, |v, u| v * 10 + u);
        let c = g.crop_columns(1, 3).unwrap();
        assert_eq!(c.as_slice(), &[1, 2, 3, 11, 12, 13]);
        assert!(g.crop_columns(3, 3).is_err());
    }

    #[test]
    fn wrap_col_is_periodic() {
        let g = Grid::filled(1, 4, 0u8);
        assert_eq!(g.wrap_col(0, -1), 3);
        assert_eq!(g.wrap_col(3, 1), 0);
    }
}
