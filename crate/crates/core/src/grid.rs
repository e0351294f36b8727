//! Periodic cubic grid standing in for a truncated copy of R³.

use crate::error::{invalid, Result};
use core::f64::consts::PI;

/// `n` nodes per axis on `[-L, L)³`, node `i` at `-L + i h`, `h = 2L/n`.
///
/// `n/2` maps to the origin, so dilation by 2 sends nodes to nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(invalid("n", "must be a power of two, at least 8"));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(invalid("half_width", "must be positive and finite"));
        }
        Ok(Self { n, half_width })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h * h
    }

    /// Total number of nodes, `n³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Signed mode number of index `i`, in `[-n/2, n/2)`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Angular wavenumber of index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> f64 {
        PI * self.mode(i) as f64 / self.half_width
    }

    /// Iterator over all node coordinates in storage order.
    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |idx| self.point(idx))
    }

    /// Same node count, box scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.half_width * factor)
    }

    /// Same box, node count multiplied by `factor` (a power of two).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.n * factor, self.half_width)
    }
}

#[inline]
pub fn norm3(x: [f64; 3]) -> f64 {
    libm::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
}
