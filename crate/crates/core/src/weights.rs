//! Power weights `(1 + |x|)^-δ`, weighted norms, reverse-Hölder
//! certificates and the weighted Sobolev ratio.

use crate::error::{invalid, Error, Result};
use crate::field::{Magnitude, ScalarField};
use crate::grid::{norm3, GridSpec};
use crate::quadrature::GaussLegendre;
use crate::spectral::SpectralOps;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weight `(1 + sqrt(eps² + |x|²))^-delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub delta: f64,
    pub eps: f64,
}

impl WeightSpec {
    pub fn new(delta: f64, eps: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid("delta", "must be positive"));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(invalid("eps", "must be non-negative"));
        }
        Ok(Self { delta, eps })
    }

    /// Unsmoothed weight.
    pub fn plain(delta: f64) -> Result<Self> {
        Self::new(delta, 0.0)
    }

    /// Checks the exponent range required by the energy estimates.
    pub fn require_energy_range(&self) -> Result<()> {
        if self.delta > 2.0 {
            return Err(invalid("gamma", "γ must be in (0,2] for energy-inequality runs"));
        }
        Ok(())
    }

    /// Same smoothing, exponent multiplied by `factor`.
    pub fn with_delta_factor(&self, factor: f64) -> Self {
        Self { delta: self.delta * factor, eps: self.eps }
    }

    #[inline]
    pub fn at_radius(&self, r: f64) -> f64 {
        let rho = if self.eps == 0.0 { r } else { libm::sqrt(self.eps * self.eps + r * r) };
        libm::pow(1.0 + rho, -self.delta)
    }

    #[inline]
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.at_radius(norm3(x))
    }

    /// Gradient of the weight. Zero at the origin, where the unsmoothed
    /// weight has a conical tip.
    #[inline]
    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let rho = libm::sqrt(self.eps * self.eps + r2);
        if rho == 0.0 {
            return [0.0; 3];
        }
        let s = -self.delta * libm::pow(1.0 + rho, -self.delta - 1.0) / rho;
        [s * x[0], s * x[1], s * x[2]]
    }
}

pub fn eval_weight(x: [f64; 3], w: &WeightSpec) -> f64 {
    w.eval(x)
}

/// Weight and its gradient sampled on a grid.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub grid: GridSpec,
    pub spec: WeightSpec,
    pub values: Vec<f64>,
    pub gradient: [Vec<f64>; 3],
}

impl WeightTable {
    pub fn new(grid: GridSpec, spec: WeightSpec) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut gradient = [Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len())];
        for x in grid.points() {
            values.push(spec.eval(x));
            let g = spec.gradient(x);
            for c in 0..3 {
                gradient[c].push(g[c]);
            }
        }
        Self { grid, spec, values, gradient }
    }
}

/// Result of a weighted quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReport {
    pub value: f64,
    pub grid: GridSpec,
    pub weight: WeightSpec,
}

/// `(Σ |f|^p w h³)^(1/p)` over the nodes.
pub fn weighted_norm<F: Magnitude>(f: &F, p: f64, w: &WeightSpec) -> Result<QuadratureReport> {
    let grid = *f.grid();
    let table = WeightTable::new(grid, *w);
    Ok(QuadratureReport { value: weighted_norm_with(f, p, &table)?, grid, weight: *w })
}

/// Same as [`weighted_norm`] with a precomputed weight table.
pub fn weighted_norm_with<F: Magnitude>(f: &F, p: f64, table: &WeightTable) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid("p", "must be at least 1"));
    }
    if *f.grid() != table.grid {
        return Err(Error::GridMismatch);
    }
    let n = table.grid.len();
    let sum: f64 = if p == 2.0 {
        (0..n).map(|i| {
            let m = f.magnitude_at(i);
            m * m * table.values[i]
        })
        .sum()
    } else {
        (0..n).map(|i| libm::pow(f.magnitude_at(i), p) * table.values[i]).sum()
    };
    Ok(libm::pow(sum * table.grid.cell_volume(), 1.0 / p))
}

/// Ball used as a reverse-Hölder probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Seed of the Monte Carlo sampler for off-centre probes.
pub const PROBE_SEED: u64 = 0x5EED;
/// Sample count of the Monte Carlo sampler for off-centre probes.
pub const PROBE_SAMPLES: usize = 1_000_000;

/// `(avg w)^(1/p) (avg w^(-1/(p-1)))^(1-1/p)` over one ball.
pub fn reverse_holder_product(w: &WeightSpec, p: f64, probe: &Probe) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid("p", "must satisfy 1 < p < ∞"));
    }
    if !(probe.radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    let q = -1.0 / (p - 1.0);
    let (avg_w, avg_dual) = if probe.center == [0.0; 3] {
        radial_averages(w, q, probe.radius)
    } else {
        monte_carlo_averages(w, q, probe)
    };
    Ok(libm::pow(avg_w, 1.0 / p) * libm::pow(avg_dual, 1.0 - 1.0 / p))
}

/// Largest reverse-Hölder product over the probes.
pub fn muckenhoupt_certificate(w: &WeightSpec, p: f64, probes: &[Probe]) -> Result<f64> {
    if probes.is_empty() {
        return Err(invalid("probes", "must be non-empty"));
    }
    let mut best = 0.0f64;
    for probe in probes {
        best = best.max(reverse_holder_product(w, p, probe)?);
    }
    Ok(best)
}

fn radial_averages(w: &WeightSpec, q: f64, radius: f64) -> (f64, f64) {
    let gl = GaussLegendre::new(24);
    let inner = f64::min(radius, 1.0);
    let mut sw = gl.integrate(0.0, inner, 4, |r| r * r * w.at_radius(r));
    let mut sd = gl.integrate(0.0, inner, 4, |r| r * r * libm::pow(w.at_radius(r), q));
    if radius > 1.0 {
        sw += gl.integrate_geometric(1.0, radius, 1.5, |r| r * r * w.at_radius(r));
        sd += gl.integrate_geometric(1.0, radius, 1.5, |r| r * r * libm::pow(w.at_radius(r), q));
    }
    let vol = radius * radius * radius / 3.0;
    (sw / vol, sd / vol)
}

fn monte_carlo_averages(w: &WeightSpec, q: f64, probe: &Probe) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let (mut sw, mut sd) = (0.0, 0.0);
    let mut accepted = 0;
    while accepted < PROBE_SAMPLES {
        let d: [f64; 3] = core::array::from_fn(|_| 2.0 * rng.random::<f64>() - 1.0);
        if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] > 1.0 {
            continue;
        }
        let x = core::array::from_fn(|c| probe.center[c] + probe.radius * d[c]);
        let v = w.eval(x);
        sw += v;
        sd += libm::pow(v, q);
        accepted += 1;
    }
    (sw / PROBE_SAMPLES as f64, sd / PROBE_SAMPLES as f64)
}

/// `‖f‖_{L⁶(w_{3δ})} / (‖f‖_{L²(w_δ)} + ‖∇f‖_{L²(w_δ)})` with a spectral gradient.
pub fn sobolev_embedding_ratio(f: &ScalarField, w: &WeightSpec) -> Result<f64> {
    let ops = SpectralOps::new(f.grid);
    let grad = ops.gradient(f);
    let table = WeightTable::new(f.grid, *w);
    let num = weighted_norm_with(f, 6.0, &WeightTable::new(f.grid, w.with_delta_factor(3.0)))?;
    let den = weighted_norm_with(f, 2.0, &table)? + weighted_norm_with(&grad, 2.0, &table)?;
    if den < 1e-14 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}
