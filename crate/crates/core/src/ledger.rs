//! Weighted energy bookkeeping: every term of the two energy controls per
//! sample, the closed-form passive and active bounds, the nonlinear
//! Grönwall inequality, and the global-extension schedule.

use crate::dynamics::{run, Sample, SolverConfig};
use crate::error::{invalid, Error, Result};
use crate::field::VectorField;
use crate::grid::GridSpec;
use crate::quadrature::cumulative_trapezoid;
use crate::spectral::SpectralOps;
use crate::weights::{WeightSpec, WeightTable};
use alloc::vec::Vec;

/// One ledger row; all time integrals run from 0 to `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedgerEntry {
    pub t: f64,
    /// `‖u(t)‖²` in `L²(w_γ)`.
    pub lhs_energy: f64,
    /// `2∫‖∇u‖²_{L²(w_γ)}`.
    pub dissipation_cum: f64,
    /// `-∫∫ ∇|u|²·∇w`.
    pub term_weight_flux: f64,
    /// `∫∫ |u|² b·∇w`.
    pub term_transport: f64,
    /// `2∫∫ p u·∇w`.
    pub term_pressure: f64,
    /// `-2 Σ ∫∫ F_ij ∂_i u_j w`.
    pub term_forcing_a: f64,
    /// `-2 Σ ∫∫ F_ij u_j ∂_i w`.
    pub term_forcing_b: f64,
    /// Right side minus left side of the first control.
    pub slack_a: f64,
    /// Right side minus left side of the second control.
    pub slack_b: f64,
    pub tol_disc: f64,
}

/// Per-sample integrands.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Integrands {
    energy: f64,
    grad: f64,
    flux: f64,
    transport: f64,
    pressure: f64,
    forcing_a: f64,
    forcing_b: f64,
    forcing_sq: f64,
    b_l3: f64,
    u_l3: f64,
}

/// Run-level quantities that feed the closed-form bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerSummary {
    pub entries: Vec<EnergyLedgerEntry>,
    pub t_end: f64,
    /// `‖u₀‖` in `L²(w_γ)`.
    pub u0_norm: f64,
    /// `sup_t ‖u‖` in `L²(w_γ)`.
    pub sup_norm: f64,
    /// `(∫‖∇u‖²)^{1/2}`.
    pub grad_norm: f64,
    /// `(∫‖F‖²)^{1/2}`.
    pub forcing_norm: f64,
    /// `(∫‖b‖³_{L³(w_{3γ/2})})^{1/3}`.
    pub b_norm: f64,
    /// `max_t ‖b‖/‖u‖` in `L³(w_{3γ/2})`.
    pub c0: f64,
    /// Squared `L²(w_γ)` norm per sample.
    pub energies: Vec<f64>,
    /// Cumulative `∫‖∇u‖²` per sample.
    pub grad_cum: Vec<f64>,
    /// Cumulative `∫‖F‖²` per sample.
    pub forcing_cum: Vec<f64>,
    /// Cumulative `∫(1 + ‖b‖²_{L³(w_{3γ/2})})‖u‖²` per sample.
    pub growth_cum: Vec<f64>,
    pub times: Vec<f64>,
}

/// Streaming ledger over solver samples.
#[derive(Debug, Clone)]
pub struct LedgerAccumulator {
    table: WeightTable,
    table3: WeightTable,
    c_gamma: f64,
    rows: Vec<Integrands>,
    times: Vec<f64>,
    dt: f64,
}

impl LedgerAccumulator {
    pub fn new(grid: GridSpec, w: WeightSpec, c_gamma: f64) -> Result<Self> {
        if !(c_gamma > 0.0) {
            return Err(invalid("C_gamma", "must be positive"));
        }
        Ok(Self {
            table: WeightTable::new(grid, w),
            table3: WeightTable::new(grid, w.with_delta_factor(1.5)),
            c_gamma,
            rows: Vec::new(),
            times: Vec::new(),
            dt: 0.0,
        })
    }

    pub fn observe(&mut self, s: &Sample) -> Result<()> {
        let g = s.u.grid;
        if g != self.table.grid {
            return Err(Error::GridMismatch);
        }
        let vol = g.cell_volume();
        let w = &self.table.values;
        let dw = &self.table.gradient;
        let w3 = &self.table3.values;
        let mut r = Integrands::default();
        let (mut b3, mut u3) = (0.0, 0.0);
        for idx in 0..g.len() {
            let u = s.u.at(idx);
            let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
            let gw = [dw[0][idx], dw[1][idx], dw[2][idx]];
            let mut grad2 = 0.0;
            let mut flux = 0.0;
            for i in 0..3 {
                let mut d_i = 0.0;
                for j in 0..3 {
                    let gij = s.grad_u.comps[i][j][idx];
                    grad2 += gij * gij;
                    d_i += u[j] * gij;
                }
                flux += 2.0 * d_i * gw[i];
            }
            let udw = u[0] * gw[0] + u[1] * gw[1] + u[2] * gw[2];
            r.energy += u2 * w[idx];
            r.grad += grad2 * w[idx];
            r.flux -= flux;
            r.pressure += 2.0 * s.p.data[idx] * udw;
            u3 += u2 * libm::sqrt(u2) * w3[idx];
            if let Some(b) = s.b {
                let bv = b.at(idx);
                r.transport += u2 * (bv[0] * gw[0] + bv[1] * gw[1] + bv[2] * gw[2]);
                let b2 = bv[0] * bv[0] + bv[1] * bv[1] + bv[2] * bv[2];
                b3 += b2 * libm::sqrt(b2) * w3[idx];
            }
            if let Some(f) = s.forcing {
                let mut fa = 0.0;
                let mut fb = 0.0;
                let mut fsq = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let fij = f.comps[i][j][idx];
                        fa += fij * s.grad_u.comps[i][j][idx];
                        fb += fij * u[j] * gw[i];
                        fsq += fij * fij;
                    }
                }
                r.forcing_a -= 2.0 * fa * w[idx];
                r.forcing_b -= 2.0 * fb;
                r.forcing_sq += fsq * w[idx];
            }
        }
        for v in [&mut r.energy, &mut r.grad, &mut r.flux, &mut r.transport, &mut r.pressure, &mut r.forcing_a, &mut r.forcing_b, &mut r.forcing_sq] {
            *v *= vol;
        }
        r.b_l3 = libm::cbrt(b3 * vol);
        r.u_l3 = libm::cbrt(u3 * vol);
        self.rows.push(r);
        self.times.push(s.t);
        self.dt = s.dt;
        Ok(())
    }

    /// `10 (dt + h²)` times the initial weighted energy, or the largest
    /// sampled energy when the run starts from rest.
    pub fn tol_disc(&self) -> f64 {
        let h = self.table.grid.spacing();
        let e0 = self.rows.first().map(|r| r.energy).unwrap_or(0.0);
        let scale = if e0 > 0.0 { e0 } else { self.rows.iter().map(|r| r.energy).fold(0.0, f64::max) };
        10.0 * (self.dt + h * h) * scale
    }

    pub fn finish(&self) -> Result<LedgerSummary> {
        if self.rows.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: self.rows.len() });
        }
        let dt = self.dt;
        let col = |f: fn(&Integrands) -> f64| -> Vec<f64> { cumulative_trapezoid(&self.rows.iter().map(f).collect::<Vec<_>>(), dt) };
        let grad = col(|r| r.grad);
        let flux = col(|r| r.flux);
        let transport = col(|r| r.transport);
        let pressure = col(|r| r.pressure);
        let fa = col(|r| r.forcing_a);
        let fb = col(|r| r.forcing_b);
        let fsq = col(|r| r.forcing_sq);
        let growth = col(|r| (1.0 + r.b_l3 * r.b_l3) * r.energy);
        let b_cubed = col(|r| r.b_l3 * r.b_l3 * r.b_l3);
        let e0 = self.rows[0].energy;
        let tol = self.tol_disc();
        let c = self.c_gamma;
        let entries: Vec<EnergyLedgerEntry> = (0..self.rows.len())
            .map(|n| {
                let e = self.rows[n].energy;
                let rhs_a = e0 + flux[n] + transport[n] + pressure[n] + fa[n] + fb[n];
                let rhs_b = e0 + c * fsq[n] + c * growth[n];
                EnergyLedgerEntry {
                    t: self.times[n],
                    lhs_energy: e,
                    dissipation_cum: 2.0 * grad[n],
                    term_weight_flux: flux[n],
                    term_transport: transport[n],
                    term_pressure: pressure[n],
                    term_forcing_a: fa[n],
                    term_forcing_b: fb[n],
                    slack_a: rhs_a - (e + 2.0 * grad[n]),
                    slack_b: rhs_b - (e + grad[n]),
                    tol_disc: tol,
                }
            })
            .collect();
        let last = self.rows.len() - 1;
        let c0 = self.rows.iter().filter(|r| r.u_l3 > 0.0).map(|r| r.b_l3 / r.u_l3).fold(0.0, f64::max);
        Ok(LedgerSummary {
            entries,
            t_end: self.times[last],
            u0_norm: libm::sqrt(e0),
            sup_norm: libm::sqrt(self.rows.iter().map(|r| r.energy).fold(0.0, f64::max)),
            grad_norm: libm::sqrt(grad[last]),
            forcing_norm: libm::sqrt(fsq[last]),
            b_norm: libm::cbrt(b_cubed[last]),
            c0,
            energies: self.rows.iter().map(|r| r.energy).collect(),
            grad_cum: grad,
            forcing_cum: fsq,
            growth_cum: growth,
            times: self.times.clone(),
        })
    }
}

/// Frozen `C_γ`: twice the largest per-run minimum over the smooth
/// calibration suite.
pub const FROZEN_C_GAMMA: [(f64, f64); 2] = [(1.5, 2.0), (2.0, 2.0)];

/// The frozen constant for `γ`, if one was calibrated.
pub fn frozen_c_gamma(gamma: f64) -> Option<f64> {
    FROZEN_C_GAMMA.iter().find(|(g, _)| (g - gamma).abs() < 1e-12).map(|(_, c)| *c)
}

/// Runs `cfg` and returns its ledger.
pub fn ledger_for_run(ops: &SpectralOps, u0: &VectorField, cfg: &SolverConfig, w: &WeightSpec, c_gamma: f64) -> Result<LedgerSummary> {
    let mut acc = LedgerAccumulator::new(*ops.grid(), *w, c_gamma)?;
    run(ops, u0, cfg, &mut |s| acc.observe(s))?;
    acc.finish()
}

impl LedgerSummary {
    /// Worst `slack / tol_disc` for each control; both must be `>= -1`.
    pub fn worst_slacks(&self) -> (f64, f64) {
        let mut a = f64::INFINITY;
        let mut b = f64::INFINITY;
        for e in &self.entries {
            let tol = if e.tol_disc > 0.0 { e.tol_disc } else { f64::MIN_POSITIVE };
            a = a.min(e.slack_a / tol);
            b = b.min(e.slack_b / tol);
        }
        (a, b)
    }

    pub fn controls_hold(&self) -> bool {
        self.entries.iter().all(|e| e.slack_a >= -e.tol_disc && e.slack_b >= -e.tol_disc)
    }

    /// Whether the passive bound holds for both the sup and gradient norms.
    pub fn passive_holds(&self, c_gamma: f64) -> bool {
        let (sup, grad) = passive_bound(self.u0_norm, self.forcing_norm, self.b_norm, self.t_end, c_gamma);
        self.sup_norm <= sup && self.grad_norm <= grad
    }

    /// Whether the active bound holds on `[0, min(T0_max, T)]`.
    pub fn active_holds(&self, c_gamma: f64) -> bool {
        let f_cum = self.forcing_cum.last().copied().unwrap_or(0.0);
        let b = active_bound(self.u0_norm, f_cum, self.c0, c_gamma);
        let mut sup: f64 = 0.0;
        let mut grad = 0.0;
        for (n, t) in self.times.iter().enumerate() {
            if *t > b.t0_max {
                break;
            }
            sup = sup.max(self.energies[n]);
            grad = self.grad_cum[n];
        }
        sup <= b.sup_bound && grad <= b.grad_bound
    }

    /// Smallest `C` with non-negative second-control slack at every row.
    pub fn min_c_second_control(&self) -> f64 {
        let e0 = self.energies[0];
        let floor = 64.0 * f64::EPSILON * e0;
        let mut c: f64 = 0.0;
        for n in 0..self.energies.len() {
            let excess = self.energies[n] + self.grad_cum[n] - e0;
            if excess > floor {
                let slope = self.forcing_cum[n] + self.growth_cum[n];
                c = c.max(if slope > 0.0 { excess / slope } else { f64::INFINITY });
            }
        }
        c
    }

    /// Smallest `C` for which the passive bound holds.
    pub fn min_c_passive(&self) -> f64 {
        smallest_c(0.0, |c| self.passive_holds(c))
    }

    /// Smallest `C >= 1` for which the active bound holds.
    pub fn min_c_active(&self) -> f64 {
        smallest_c(1.0, |c| self.active_holds(c))
    }
}

/// Bisection for the smallest `C >= floor` satisfying a check that is
/// monotone in `C`; infinite when no `C` up to `1e6` works.
fn smallest_c(floor: f64, holds: impl Fn(f64) -> bool) -> f64 {
    if holds(floor) {
        return floor;
    }
    let mut hi = floor.max(1e-6);
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    let mut lo = floor;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `T1 = min(T, T0, 1/(4B(A+BT0)²))` and the bound `√2 (A + B T0)`.
pub fn gronwall_t1(a: f64, b: f64, t: f64, t0: f64) -> Result<(f64, f64)> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(invalid("A, B", "must be non-negative"));
    }
    if !(t0 > 0.0) {
        return Err(invalid("T0", "must be positive"));
    }
    let s = a + b * t0;
    let third = if b == 0.0 { f64::INFINITY } else { 1.0 / (4.0 * b * s * s) };
    Ok((t.min(t0).min(third), core::f64::consts::SQRT_2 * s))
}

/// Classical RK4 for `α' = B(α + α³)` from `α(0) = alpha0` on `[0, t1]`;
/// returns the largest value reached.
pub fn gronwall_equality_sup(alpha0: f64, b: f64, t1: f64, step: f64) -> f64 {
    let f = |a: f64| b * (a + a * a * a);
    let n = libm::ceil(t1 / step) as usize;
    let h = t1 / n as f64;
    let mut a = alpha0;
    let mut sup = a;
    for _ in 0..n {
        let k1 = f(a);
        let k2 = f(a + 0.5 * h * k1);
        let k3 = f(a + 0.5 * h * k2);
        let k4 = f(a + h * k3);
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        sup = sup.max(a);
    }
    sup
}

/// `(‖u₀‖ + C‖F‖) e^{C(T + T^{1/3}‖b‖²)}` for both the sup norm and the
/// gradient norm.
pub fn passive_bound(u0_norm: f64, f_norm: f64, b_norm: f64, t: f64, c_gamma: f64) -> (f64, f64) {
    let v = (u0_norm + c_gamma * f_norm) * libm::exp(c_gamma * (t + libm::cbrt(t) * b_norm * b_norm));
    (v, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveBound {
    pub t0_max: f64,
    /// Bound on `sup ‖u‖²`.
    pub sup_bound: f64,
    /// Bound on `∫‖∇u‖²`.
    pub grad_bound: f64,
}

/// Active-transport bound with `K = 1 + C0⁴ + ‖u₀‖² + ∫‖F‖²`:
/// `T0_max = 1/(C(1+C0⁴)K²)` and both bounds `C K`.
pub fn active_bound(u0_norm: f64, f_cum: f64, c0: f64, c_gamma: f64) -> ActiveBound {
    let c04 = c0 * c0 * c0 * c0;
    let k = 1.0 + c04 + u0_norm * u0_norm + f_cum;
    ActiveBound { t0_max: 1.0 / (c_gamma * (1.0 + c04) * k * k), sup_bound: c_gamma * k, grad_bound: c_gamma * k }
}

/// One row of the global-extension schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleRow {
    pub n: u32,
    /// `‖v_{0,n}‖²` from the rescaled field.
    pub norm_rescaled: f64,
    /// The same norm from the change-of-variables integrand.
    pub norm_change_of_variables: f64,
    pub t_n: f64,
    /// `λ^{2n} T_n`.
    pub stretched: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub rows: Vec<ScheduleRow>,
    /// `λ^{2n} T_n` strictly increasing over the computed range.
    pub increasing: bool,
}

/// `T_n = 1/(C(1 + ‖v_{0,n}‖²)²)` for `v_{0,n} = λⁿ u₀(λⁿ·)`, unforced.
///
/// The rescaled field is sampled on the grid shrunk by `λⁿ`, whose nodes
/// map onto the original nodes, so no interpolation is needed.
pub fn global_extension_schedule(u0: &VectorField, w: &WeightSpec, lambda: f64, c_gamma: f64, n_max: u32) -> Result<Schedule> {
    if n_max < 1 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    if !(lambda > 1.0) {
        return Err(invalid("lambda", "must exceed 1"));
    }
    if !(w.delta <= 2.0) {
        return Err(invalid("gamma", "must not exceed 2"));
    }
    let g = u0.grid;
    let gamma = w.delta;
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let ln = libm::pow(lambda, n as f64);
        let gs = g.scaled(1.0 / ln)?;
        let mut v = VectorField { grid: gs, comps: u0.comps.clone() };
        v.scale(ln);
        let table = WeightTable::new(gs, *w);
        let rescaled = crate::weights::weighted_norm_with(&v, 2.0, &table)?;
        let mut cov = 0.0;
        let base = WeightTable::new(g, *w);
        for (idx, x) in g.points().enumerate() {
            let r = crate::grid::norm3(x);
            let u = u0.at(idx);
            let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
            cov += u2 * libm::pow(ln, gamma - 1.0) * libm::pow((1.0 + r) / (ln + r), gamma) * base.values[idx];
        }
        cov *= g.cell_volume();
        let norm2 = rescaled * rescaled;
        let s = 1.0 + norm2;
        let t_n = 1.0 / (c_gamma * s * s);
        rows.push(ScheduleRow { n, norm_rescaled: norm2, norm_change_of_variables: cov, t_n, stretched: ln * ln * t_n });
    }
    let increasing = rows.windows(2).all(|p| p[1].stretched > p[0].stretched);
    Ok(Schedule { rows, increasing })
}
