//! Fourier-side operators on a periodic grid.
//!
//! First-derivative multipliers use the wavenumber with the Nyquist entry
//! set to zero, so that gradient, divergence, Riesz transforms and the
//! Leray projector stay mutually consistent and map real fields to real
//! fields. The Laplacian and heat multiplier use the true `|k|²`.

use crate::error::{invalid, Error, Result};
use crate::fft::Fft3;
use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::GridSpec;
use crate::mollifier::{Bump, MollifierSpec};
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

pub type Spectrum = Vec<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Transform plan, wavenumber tables and dealiasing mask for one grid.
#[derive(Debug, Clone)]
pub struct SpectralOps {
    grid: GridSpec,
    fft: Fft3,
    /// True wavenumber per axis index.
    k: Vec<f64>,
    /// Wavenumber with the Nyquist entry zeroed.
    k_eff: Vec<f64>,
    /// 2/3-rule mask per axis index.
    keep: Vec<bool>,
    bump: Bump,
}

impl SpectralOps {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.n();
        let k: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
        let k_eff = (0..n).map(|i| if i == n / 2 { 0.0 } else { k[i] }).collect();
        let keep = (0..n).map(|i| 3 * grid.mode(i).unsigned_abs() < n as u64).collect();
        Self { grid, fft: Fft3::new(n), k, k_eff, keep, bump: Bump::new() }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    /// Visits every mode as `(index, k_eff vector, true |k|²)`.
    #[inline]
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, [f64; 3], f64)) {
        let n = self.grid.n();
        let mut idx = 0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let k2 = self.k[a] * self.k[a] + self.k[b] * self.k[b] + self.k[c] * self.k[c];
                    f(idx, [self.k_eff[a], self.k_eff[b], self.k_eff[c]], k2);
                    idx += 1;
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Spectrum {
        let mut out: Spectrum = f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.fft.forward(&mut out);
        out
    }

    /// Two real transforms for the price of one complex transform.
    pub fn forward_pair(&self, f: &[f64], g: &[f64]) -> (Spectrum, Spectrum) {
        let mut z: Spectrum = f.iter().zip(g).map(|(a, b)| Complex64::new(*a, *b)).collect();
        self.fft.forward(&mut z);
        let n = self.grid.n();
        let neg = |i: usize| if i == 0 { 0 } else { n - i };
        let mut fa = vec![Complex64::new(0.0, 0.0); z.len()];
        let mut fb = vec![Complex64::new(0.0, 0.0); z.len()];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let idx = self.grid.index(a, b, c);
                    let zc = z[self.grid.index(neg(a), neg(b), neg(c))].conj();
                    fa[idx] = 0.5 * (z[idx] + zc);
                    fb[idx] = -0.5 * I * (z[idx] - zc);
                }
            }
        }
        (fa, fb)
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self, s: &[Complex64]) -> Vec<f64> {
        let mut w = s.to_vec();
        self.fft.inverse(&mut w);
        w.iter().map(|v| v.re).collect()
    }

    /// Inverse of two Hermitian spectra with one complex transform.
    pub fn inverse_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut w: Spectrum = a.iter().zip(b).map(|(x, y)| x + I * y).collect();
        self.fft.inverse(&mut w);
        (w.iter().map(|v| v.re).collect(), w.iter().map(|v| v.im).collect())
    }

    pub fn forward_vector(&self, v: &VectorField) -> [Spectrum; 3] {
        let (a, b) = self.forward_pair(&v.comps[0], &v.comps[1]);
        [a, b, self.forward(&v.comps[2])]
    }

    pub fn inverse_vector(&self, s: &[Spectrum; 3]) -> VectorField {
        let (a, b) = self.inverse_pair(&s[0], &s[1]);
        VectorField { grid: self.grid, comps: [a, b, self.inverse(&s[2])] }
    }

    /// Inverse transforms of any number of Hermitian spectra, paired up.
    pub fn inverse_many(&self, specs: &[&Spectrum]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(specs.len());
        let mut i = 0;
        while i + 1 < specs.len() {
            let (a, b) = self.inverse_pair(specs[i], specs[i + 1]);
            out.push(a);
            out.push(b);
            i += 2;
        }
        if i < specs.len() {
            out.push(self.inverse(specs[i]));
        }
        out
    }

    /// Forward transforms of any number of real arrays, paired up.
    pub fn forward_many(&self, fields: &[&[f64]]) -> Vec<Spectrum> {
        let mut out = Vec::with_capacity(fields.len());
        let mut i = 0;
        while i + 1 < fields.len() {
            let (a, b) = self.forward_pair(fields[i], fields[i + 1]);
            out.push(a);
            out.push(b);
            i += 2;
        }
        if i < fields.len() {
            out.push(self.forward(fields[i]));
        }
        out
    }

    /// Zeroes modes outside the 2/3-rule box.
    pub fn dealias(&self, s: &mut [Complex64]) {
        let n = self.grid.n();
        let mut idx = 0;
        for a in 0..n {
            for b in 0..n {
                let row = self.keep[a] && self.keep[b];
                for c in 0..n {
                    if !(row && self.keep[c]) {
                        s[idx] = Complex64::new(0.0, 0.0);
                    }
                    idx += 1;
                }
            }
        }
    }

    /// Multiplies by `e^{-|k|² t}`.
    pub fn heat(&self, s: &mut [Complex64], t: f64) {
        self.for_each_mode(|idx, _, k2| s[idx] *= libm::exp(-k2 * t));
    }

    /// Spectral derivative along `axis`.
    pub fn derivative_hat(&self, s: &[Complex64], axis: usize) -> Spectrum {
        let mut out = s.to_vec();
        self.for_each_mode(|idx, k, _| out[idx] *= I * k[axis]);
        out
    }

    pub fn gradient_hat(&self, s: &[Complex64]) -> [Spectrum; 3] {
        [0, 1, 2].map(|a| self.derivative_hat(s, a))
    }

    pub fn divergence_hat(&self, v: &[Spectrum; 3]) -> Spectrum {
        let mut out = vec![Complex64::new(0.0, 0.0); v[0].len()];
        self.for_each_mode(|idx, k, _| {
            out[idx] = I * (k[0] * v[0][idx] + k[1] * v[1][idx] + k[2] * v[2][idx]);
        });
        out
    }

    /// Removes the gradient part of each mode; pure-Nyquist and mean modes
    /// pass through.
    pub fn leray_hat(&self, v: &mut [Spectrum; 3]) {
        self.for_each_mode(|idx, k, _| {
            let ke2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if ke2 == 0.0 {
                return;
            }
            let dot = (k[0] * v[0][idx] + k[1] * v[1][idx] + k[2] * v[2][idx]) / ke2;
            for c in 0..3 {
                v[c][idx] -= dot * k[c];
            }
        });
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        let s = self.forward(&f.data);
        let g = self.gradient_hat(&s);
        self.inverse_vector(&g)
    }

    pub fn divergence(&self, v: &VectorField) -> ScalarField {
        let s = self.forward_vector(v);
        ScalarField { grid: self.grid, data: self.inverse(&self.divergence_hat(&s)) }
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let mut s = self.forward(&f.data);
        self.for_each_mode(|idx, _, k2| s[idx] *= -k2);
        ScalarField { grid: self.grid, data: self.inverse(&s) }
    }

    /// Multiplier `-i k_j / |k|`, zero where the effective wavenumber vanishes.
    pub fn riesz_transform(&self, f: &ScalarField, j: usize) -> ScalarField {
        let mut s = self.forward(&f.data);
        self.riesz_hat(&mut s, j);
        ScalarField { grid: self.grid, data: self.inverse(&s) }
    }

    pub fn riesz_hat(&self, s: &mut [Complex64], j: usize) {
        self.for_each_mode(|idx, k, _| {
            let ke = libm::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            s[idx] = if ke == 0.0 { Complex64::new(0.0, 0.0) } else { s[idx] * (-I * k[j] / ke) };
        });
    }

    /// Spectral curl; the result is discretely divergence-free.
    pub fn curl(&self, a: &VectorField) -> VectorField {
        let s = self.forward_vector(a);
        let mut out: [Spectrum; 3] = core::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); s[0].len()]);
        self.for_each_mode(|idx, k, _| {
            let v = [s[0][idx], s[1][idx], s[2][idx]];
            for i in 0..3 {
                let (j, l) = ((i + 1) % 3, (i + 2) % 3);
                out[i][idx] = I * (k[j] * v[l] - k[l] * v[j]);
            }
        });
        self.inverse_vector(&out)
    }

    pub fn leray_project(&self, v: &VectorField) -> VectorField {
        let mut s = self.forward_vector(v);
        self.leray_hat(&mut s);
        self.inverse_vector(&s)
    }

    /// Pressure `Σ R_i R_j (b_i u_j - F_ij)`, products formed from
    /// dealiased factors and dealiased again.
    pub fn pressure_solve(&self, b: &VectorField, u: &VectorField, f: Option<&TensorField>) -> Result<ScalarField> {
        if b.grid != self.grid || u.grid != self.grid || f.is_some_and(|f| f.grid != self.grid) {
            return Err(Error::GridMismatch);
        }
        let b = self.dealiased(b);
        let u = self.dealiased(u);
        let mut products: Vec<Vec<f64>> = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                products.push(b.comps[i].iter().zip(&u.comps[j]).map(|(x, y)| x * y).collect());
            }
        }
        let refs: Vec<&[f64]> = products.iter().map(|v| v.as_slice()).collect();
        let mut g = self.forward_many(&refs);
        for s in g.iter_mut() {
            self.dealias(s);
        }
        if let Some(f) = f {
            let frefs: Vec<&[f64]> = f.comps.iter().flatten().map(|v| v.as_slice()).collect();
            for (s, fs) in g.iter_mut().zip(self.forward_many(&frefs)) {
                for (a, b) in s.iter_mut().zip(fs) {
                    *a -= b;
                }
            }
        }
        let p = self.pressure_hat(&g);
        Ok(ScalarField { grid: self.grid, data: self.inverse(&p) })
    }

    /// `-k_i k_j G_ij / |k|²` for a row-major list of nine spectra.
    pub fn pressure_hat(&self, g: &[Spectrum]) -> Spectrum {
        let mut out = vec![Complex64::new(0.0, 0.0); g[0].len()];
        self.for_each_mode(|idx, k, _| {
            let ke2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if ke2 == 0.0 {
                return;
            }
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    s += k[i] * k[j] * g[3 * i + j][idx];
                }
            }
            out[idx] = -s / ke2;
        });
        out
    }

    pub fn dealiased(&self, v: &VectorField) -> VectorField {
        let mut s = self.forward_vector(v);
        for c in s.iter_mut() {
            self.dealias(c);
        }
        self.inverse_vector(&s)
    }

    /// Transform of the bump at scale `s`, tabulated by integer `|m|²`.
    pub fn mollifier_table(&self, scale: f64) -> MollifierTable {
        let half = (self.grid.n() / 2) as usize;
        let size = 3 * half * half + 1;
        let k0 = core::f64::consts::PI / self.grid.half_width();
        let values = (0..size)
            .map(|m2| if scale == 0.0 { 1.0 } else { self.bump.transform(scale * k0 * libm::sqrt(m2 as f64)) })
            .collect();
        MollifierTable { scale, values }
    }

    /// Multiplies a spectrum by a tabulated mollifier transform.
    pub fn apply_mollifier(&self, s: &mut [Complex64], table: &MollifierTable) {
        if table.scale == 0.0 {
            return;
        }
        let n = self.grid.n();
        let m2: Vec<usize> = (0..n).map(|i| {
            let m = self.grid.mode(i).unsigned_abs() as usize;
            m * m
        }).collect();
        let mut idx = 0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    s[idx] *= table.values[m2[a] + m2[b] + m2[c]];
                    idx += 1;
                }
            }
        }
    }

    /// Circular convolution of a vector field with the bump at the scale
    /// given by `m` and `t`.
    pub fn mollify(&self, v: &VectorField, m: &MollifierSpec, t: Option<f64>) -> Result<VectorField> {
        let table = self.mollifier_table(m.scale(t)?);
        let mut s = self.forward_vector(v);
        for c in s.iter_mut() {
            self.apply_mollifier(c, &table);
        }
        Ok(self.inverse_vector(&s))
    }

    pub fn mollify_scalar(&self, f: &ScalarField, m: &MollifierSpec, t: Option<f64>) -> Result<ScalarField> {
        let table = self.mollifier_table(m.scale(t)?);
        let mut s = self.forward(&f.data);
        self.apply_mollifier(&mut s, &table);
        Ok(ScalarField { grid: self.grid, data: self.inverse(&s) })
    }

    /// Dyadic radius ladder `h, 2h, 4h, …` up to the half-width.
    pub fn default_radii(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let mut out = Vec::new();
        let mut r = h;
        while r <= self.grid.half_width() * (1.0 + 1e-12) {
            out.push(r);
            r *= 2.0;
        }
        out
    }

    /// Pointwise maximum of `|f|` and its ball averages over `radii`.
    pub fn maximal_function(&self, f: &ScalarField, radii: &[f64]) -> Result<ScalarField> {
        if radii.is_empty() {
            return Err(invalid("radii", "must be non-empty"));
        }
        let h = self.grid.spacing();
        if radii.iter().any(|r| *r < h * (1.0 - 1e-12)) {
            return Err(invalid("radii", "each radius must be at least the grid spacing"));
        }
        let abs: Vec<f64> = f.data.iter().map(|v| v.abs()).collect();
        let fa = self.forward(&abs);
        let mut out = abs.clone();
        let kernels: Vec<(Vec<f64>, f64)> = radii.iter().map(|r| self.ball_kernel(*r)).collect();
        let mut i = 0;
        while i < kernels.len() {
            let pair = i + 1 < kernels.len();
            let (ka, kb) = if pair {
                self.forward_pair(&kernels[i].0, &kernels[i + 1].0)
            } else {
                (self.forward(&kernels[i].0), Vec::new())
            };
            let pa: Spectrum = fa.iter().zip(&ka).map(|(x, y)| x * y).collect();
            let (ra, rb) = if pair {
                let pb: Spectrum = fa.iter().zip(&kb).map(|(x, y)| x * y).collect();
                self.inverse_pair(&pa, &pb)
            } else {
                (self.inverse(&pa), Vec::new())
            };
            for (o, v) in out.iter_mut().zip(&ra) {
                *o = o.max(v / kernels[i].1);
            }
            if pair {
                for (o, v) in out.iter_mut().zip(&rb) {
                    *o = o.max(v / kernels[i + 1].1);
                }
            }
            i += 2;
        }
        Ok(ScalarField { grid: self.grid, data: out })
    }

    /// Indicator of lattice offsets within `radius`, wrapped onto the grid,
    /// and the number of offsets.
    fn ball_kernel(&self, radius: f64) -> (Vec<f64>, f64) {
        let n = self.grid.n() as i64;
        let h = self.grid.spacing();
        let mut k = vec![0.0; self.grid.len()];
        let mut count = 0.0;
        let rr = radius / h;
        for a in -n / 2..n / 2 {
            for b in -n / 2..n / 2 {
                for c in -n / 2..n / 2 {
                    if ((a * a + b * b + c * c) as f64) <= rr * rr * (1.0 + 1e-12) {
                        let w = |m: i64| m.rem_euclid(n) as usize;
                        k[self.grid.index(w(a), w(b), w(c))] = 1.0;
                        count += 1.0;
                    }
                }
            }
        }
        (k, count)
    }
}

/// Tabulated bump transform for one scale.
#[derive(Debug, Clone)]
pub struct MollifierTable {
    pub scale: f64,
    values: Vec<f64>,
}
