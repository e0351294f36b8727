//! One-dimensional quadrature rules.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for i in 0..order {
            // Chebyshev guess, then Newton on P_n.
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (order as f64 + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]` split into `panels` equal pieces.
    pub fn integrate(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let w = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * w;
            let mid = lo + 0.5 * w;
            let mut s = 0.0;
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                s += wt * f(mid + 0.5 * w * x);
            }
            total += 0.5 * w * s;
        }
        total
    }

    /// Integral over `[a, b]` on geometric panels `a, a r, a r², …`, `a > 0`.
    pub fn integrate_geometric(&self, a: f64, b: f64, ratio: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut total = 0.0;
        let mut lo = a;
        while lo < b {
            let hi = f64::min(lo * ratio, b);
            total += self.integrate(lo, hi, 1, &mut f);
            lo = hi;
        }
        total
    }

    /// Integral of `f` over `(0, ∞)` via `s = u/(1-u)`.
    pub fn integrate_half_line(&self, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.integrate(0.0, 1.0, panels, |u| {
            let s = u / (1.0 - u);
            let jac = 1.0 / ((1.0 - u) * (1.0 - u));
            f(s) * jac
        })
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        m => dt * (0.5 * samples[0] + samples[1..m - 1].iter().sum::<f64>() + 0.5 * samples[m - 1]),
    }
}

/// Running trapezoid integral: entry `i` integrates samples `0..=i`.
pub fn cumulative_trapezoid(samples: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    for (i, v) in samples.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (samples[i - 1] + v);
        }
        out.push(acc);
    }
    out
}
