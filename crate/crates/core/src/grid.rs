//! Row-major 2-D grids shared by every raster-shaped product.

use serde::{Deserialize, Serialize};

/// A dense row-major grid of `height * width` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    /// Wraps `data` as a grid. Returns `None` when the length does not match
    /// the geometry or either extent is zero.
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Option<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return None;
        }
        Some(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(height > 0 && width > 0, "grid extents must be positive");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid { height: self.height, width: self.width, data: self.data.iter().map(f).collect() }
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        assert!(height > 0 && width > 0, "grid extents must be positive");
        Self { height, width, data: vec![value; height * width] }
    }
}

impl Grid<f64> {
    /// Block-mean downsampling by an integer factor on both axes.
    pub fn block_mean(&self, factor: usize) -> Option<Grid<f64>> {
        if factor == 0 || !self.height.is_multiple_of(factor) || !self.width.is_multiple_of(factor) {
            return None;
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let norm = (factor * factor) as f64;
        Some(Grid::from_fn(h, w, |r, c| {
            let mut acc = 0.0;
            for dr in 0..factor {
                for dc in 0..factor {
                    acc += self.get(r * factor + dr, c * factor + dc);
                }
            }
            acc / norm
        }))
    }
}

impl Grid<u8> {
    /// Majority vote over `factor x factor` blocks of a {0,1} grid. Ties go
    /// to 1, matching the threshold rule where the boundary value is a hit.
    pub fn block_majority(&self, factor: usize) -> Option<Grid<u8>> {
        if factor == 0 || !self.height.is_multiple_of(factor) || !self.width.is_multiple_of(factor) {
            return None;
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let cells = factor * factor;
        Some(Grid::from_fn(h, w, |r, c| {
            let mut ones = 0usize;
            for dr in 0..factor {
                for dc in 0..factor {
                    if *self.get(r * factor + dr, c * factor + dc) != 0 {
                        ones += 1;
                    }
                }
            }
            u8::from(2 * ones >= cells)
        }))
    }
}
