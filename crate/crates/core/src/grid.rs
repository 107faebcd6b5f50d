use crate::error::{Error, Result};

/// Uniform 1-D sampling grid, `n` nodes from `x_min` to `x_max` inclusive.
///
/// Integrals over a grid use the rectangle rule with weight [`SpatialGrid::spacing`].
/// Build grids with [`SpatialGrid::cell_centered`] when the nodes should sit at
/// cell midpoints of an interval (midpoint quadrature over that interval).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid("at least two nodes are required"));
        }
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite"));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid("x_max must exceed x_min"));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// `n` nodes at the midpoints of `n` equal cells tiling `[lo, hi]`.
    pub fn cell_centered(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidGrid("x_max must exceed x_min"));
        }
        let cell = (hi - lo) / n as f64;
        Self::new(lo + 0.5 * cell, hi - 0.5 * cell, n)
    }

    /// Grid symmetric about zero with `n` nodes and the given spacing.
    pub fn centered(spacing: f64, n: usize) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidGrid("spacing must be positive"));
        }
        let half = 0.5 * spacing * (n as f64 - 1.0);
        Self::new(-half, half, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        let dx = self.spacing();
        (0..self.n).map(move |i| self.x_min + i as f64 * dx)
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-9 * self.spacing();
        x >= self.x_min - tol && x <= self.x_max + tol
    }

    /// Index of the node nearest `x`, or an out-of-range error.
    pub fn nearest(&self, x: f64) -> Result<usize> {
        if !self.contains(x) {
            return Err(self.out_of_range(x));
        }
        let t = (x - self.x_min) / self.spacing();
        Ok((libm::round(t) as usize).min(self.n - 1))
    }

    /// Sub-grid made of nodes `start..start + n`.
    pub fn slice(&self, start: usize, n: usize) -> Result<Self> {
        if start + n > self.n {
            return Err(Error::InvalidGrid("slice exceeds the grid"));
        }
        Self::new(self.x(start), self.x(start + n - 1), n)
    }

    pub(crate) fn out_of_range(&self, x: f64) -> Error {
        Error::OutOfRange {
            position: x,
            min: self.x_min,
            max: self.x_max,
        }
    }
}
