//! Real-valued fields sampled on a [`GridSpec`].

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

/// Three components stored as separate arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub comps: [Vec<f64>; 3],
}

/// Nine components, `comps[i][j]` is `F_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub grid: GridSpec,
    pub comps: [[Vec<f64>; 3]; 3],
}

fn check(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { data: vec![0.0; grid.len()], grid }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        Self { data: grid.points().map(f).collect(), grid }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(crate::error::invalid("data", "length differs from n³"));
        }
        Ok(Self { grid, data })
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        check(&self.grid, &other.grid)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Unweighted L² norm over the box.
    pub fn l2(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume())
    }

    /// Periodic shift by a lattice vector.
    pub fn rolled(&self, shift: [isize; 3]) -> Self {
        Self { grid: self.grid, data: roll(&self.grid, &self.data, shift) }
    }
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![0.0; grid.len()];
        Self { comps: [z.clone(), z.clone(), z], grid }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for (idx, x) in grid.points().enumerate() {
            let v = f(x);
            for c in 0..3 {
                out.comps[c][idx] = v[c];
            }
        }
        out
    }

    pub fn from_components(a: ScalarField, b: ScalarField, c: ScalarField) -> Result<Self> {
        check(&a.grid, &b.grid)?;
        check(&a.grid, &c.grid)?;
        Ok(Self { grid: a.grid, comps: [a.data, b.data, c.data] })
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField { grid: self.grid, data: self.comps[c].clone() }
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    pub fn scale(&mut self, c: f64) {
        for comp in self.comps.iter_mut() {
            comp.iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        check(&self.grid, &other.grid)?;
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn magnitude(&self) -> ScalarField {
        let data = (0..self.grid.len())
            .map(|i| {
                let v = self.at(i);
                libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            })
            .collect();
        ScalarField { grid: self.grid, data }
    }

    pub fn max_abs(&self) -> f64 {
        let m = (0..self.grid.len()).fold(0.0, |m, i| {
            let v = self.at(i);
            f64::max(m, v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        });
        libm::sqrt(m)
    }

    pub fn mean(&self) -> [f64; 3] {
        let n = self.grid.len() as f64;
        [0, 1, 2].map(|c| self.comps[c].iter().sum::<f64>() / n)
    }

    pub fn l2(&self) -> f64 {
        let s: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
        libm::sqrt(s * self.grid.cell_volume())
    }

    pub fn rolled(&self, shift: [isize; 3]) -> Self {
        Self {
            grid: self.grid,
            comps: [0, 1, 2].map(|c| roll(&self.grid, &self.comps[c], shift)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| *v == 0.0))
    }
}

impl TensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![0.0; grid.len()];
        let row = [z.clone(), z.clone(), z];
        Self { comps: [row.clone(), row.clone(), row], grid }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [[f64; 3]; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for (idx, x) in grid.points().enumerate() {
            let v = f(x);
            for i in 0..3 {
                for j in 0..3 {
                    out.comps[i][j][idx] = v[i][j];
                }
            }
        }
        out
    }

    pub fn scale(&mut self, c: f64) {
        for row in self.comps.iter_mut() {
            for comp in row.iter_mut() {
                comp.iter_mut().for_each(|v| *v *= c);
            }
        }
    }

    /// Frobenius norm at node `idx`, squared.
    #[inline]
    pub fn frob_sq(&self, idx: usize) -> f64 {
        let mut s = 0.0;
        for row in &self.comps {
            for comp in row {
                s += comp[idx] * comp[idx];
            }
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().flatten().all(|c| c.iter().all(|v| *v == 0.0))
    }

    pub fn rolled(&self, shift: [isize; 3]) -> Self {
        Self {
            grid: self.grid,
            comps: [0, 1, 2].map(|i| [0, 1, 2].map(|j| roll(&self.grid, &self.comps[i][j], shift))),
        }
    }
}

fn roll(grid: &GridSpec, data: &[f64], shift: [isize; 3]) -> Vec<f64> {
    let n = grid.n() as isize;
    let mut out = vec![0.0; data.len()];
    for (idx, v) in data.iter().enumerate() {
        let (i, j, k) = grid.unravel(idx);
        let t = |a: usize, s: isize| ((a as isize + s).rem_euclid(n)) as usize;
        out[grid.index(t(i, shift[0]), t(j, shift[1]), t(k, shift[2]))] = *v;
    }
    out
}

/// Pointwise magnitude, used by the weighted norms.
pub trait Magnitude {
    fn grid(&self) -> &GridSpec;
    fn magnitude_at(&self, idx: usize) -> f64;
}

impl Magnitude for ScalarField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    #[inline]
    fn magnitude_at(&self, idx: usize) -> f64 {
        self.data[idx].abs()
    }
}

impl Magnitude for VectorField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    #[inline]
    fn magnitude_at(&self, idx: usize) -> f64 {
        let v = self.at(idx);
        libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    }
}

impl Magnitude for TensorField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    #[inline]
    fn magnitude_at(&self, idx: usize) -> f64 {
        libm::sqrt(self.frob_sq(idx))
    }
}
