//! Time stepping for the mollified Navier–Stokes and advection–diffusion
//! systems, and the local energy balance defect.
//!
//! One step is `û ← e^{-|k|²dt} û + φ₁(dt) P N̂` with
//! `N = -∇·(b ⊗ u) + ∇·F`, the product formed from 2/3-dealiased factors.
//! Every sample (including the initial and final states) is handed to an
//! observer together with its gradient, pressure, advecting field and
//! forcing, so diagnostics never need the stored trajectory.

use crate::error::{invalid, Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::fields::{random_solenoidal, ForcingSpec};
use crate::grid::GridSpec;
use crate::mollifier::MollifierSpec;
use crate::spectral::{SpectralOps, Spectrum};
use crate::weights::{weighted_norm_with, WeightSpec, WeightTable};
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Advecting field of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Advection {
    /// Stokes flow.
    None,
    /// `b = u ∗ θ`, the mollified velocity itself.
    SelfMollified,
    /// Time-independent `b`, used as given.
    Frozen(VectorField),
    /// `b(t_n)` for every step time, including the final one; mollified by
    /// the run's mollifier when `mollify` is set.
    Prescribed { samples: Vec<VectorField>, mollify: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub mollifier: MollifierSpec,
    pub forcing: ForcingSpec,
    pub advection: Advection,
    /// Courant number bound on `dt max|b| / h`.
    pub cfl: f64,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, mollifier: MollifierSpec, forcing: ForcingSpec, advection: Advection) -> Result<Self> {
        let cfg = Self { dt, t_end, mollifier, forcing, advection, cfl: 0.5 };
        cfg.steps()?;
        Ok(cfg)
    }

    /// Number of steps; `dt` must divide the horizon.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(invalid("T", "must be positive"));
        }
        let n = libm::round(self.t_end / self.dt);
        if n < 1.0 || libm::fabs(n * self.dt - self.t_end) > 1e-9 * self.t_end {
            return Err(invalid("dt", "must divide the horizon"));
        }
        Ok(n as usize)
    }

    pub fn with_advection(&self, advection: Advection) -> Self {
        Self { advection, ..self.clone() }
    }
}

/// Snapshot passed to observers at every step time.
#[derive(Debug)]
pub struct Sample<'a> {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub u: &'a VectorField,
    /// `grad_u[i][j] = ∂_i u_j`.
    pub grad_u: &'a TensorField,
    pub p: &'a ScalarField,
    /// Advecting field, `None` for Stokes flow.
    pub b: Option<&'a VectorField>,
    /// Forcing tensor at `t`; at `t = 0` singular forcing is taken at `dt/2`.
    pub forcing: Option<&'a TensorField>,
    /// `(∇·F)_j = Σ_i ∂_i F_ij`.
    pub div_forcing: Option<&'a VectorField>,
}

/// Stored state of a collected run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u: VectorField,
    pub p: ScalarField,
}

/// Explicit stepper; `advance` emits the current sample and then moves one
/// step forward.
pub struct Solver<'a> {
    ops: &'a SpectralOps,
    cfg: &'a SolverConfig,
    u: VectorField,
    step: usize,
    steps: usize,
    decay: Vec<f64>,
    phi: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(ops: &'a SpectralOps, cfg: &'a SolverConfig, u0: VectorField) -> Result<Self> {
        let g = *ops.grid();
        if u0.grid != g {
            return Err(Error::GridMismatch);
        }
        let steps = cfg.steps()?;
        if let Advection::Frozen(b) = &cfg.advection {
            if b.grid != g {
                return Err(Error::GridMismatch);
            }
        }
        if let Advection::Prescribed { samples, .. } = &cfg.advection {
            if samples.len() < steps + 1 {
                return Err(Error::TooFewSamples { needed: steps + 1, got: samples.len() });
            }
            if samples.iter().any(|b| b.grid != g) {
                return Err(Error::GridMismatch);
            }
        }
        let dt = cfg.dt;
        let mut decay = vec![0.0; g.len()];
        let mut phi = vec![0.0; g.len()];
        ops.for_each_mode(|idx, _, k2| {
            decay[idx] = libm::exp(-k2 * dt);
            phi[idx] = if k2 == 0.0 { dt } else { -libm::expm1(-k2 * dt) / k2 };
        });
        Ok(Self { ops, cfg, u: u0, step: 0, steps, decay, phi })
    }

    /// Solver positioned at step `step` with state `u`.
    pub fn at_step(ops: &'a SpectralOps, cfg: &'a SolverConfig, u: VectorField, step: usize) -> Result<Self> {
        let mut s = Self::new(ops, cfg, u)?;
        if step > s.steps {
            return Err(invalid("step", "beyond the horizon"));
        }
        s.step = step;
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn u(&self) -> &VectorField {
        &self.u
    }

    pub fn finished(&self) -> bool {
        self.step > self.steps
    }

    /// Emits the sample at the current time and, unless it was the last,
    /// takes one step. Returns `false` once the final sample was emitted.
    pub fn advance(&mut self, observe: &mut dyn FnMut(&Sample) -> Result<()>) -> Result<bool> {
        if self.finished() {
            return Ok(false);
        }
        let ops = self.ops;
        let g = *ops.grid();
        let dt = self.cfg.dt;
        let t = self.t();
        let uh = ops.forward_vector(&self.u);

        // Advecting field, full and dealiased.
        let bh: Option<[Spectrum; 3]> = match &self.cfg.advection {
            Advection::None => None,
            Advection::SelfMollified => {
                let table = ops.mollifier_table(self.mollifier_scale(t)?);
                let mut s = uh.clone();
                for c in s.iter_mut() {
                    ops.apply_mollifier(c, &table);
                }
                Some(s)
            }
            Advection::Frozen(b) => Some(ops.forward_vector(b)),
            Advection::Prescribed { samples, mollify } => {
                let mut s = ops.forward_vector(&samples[self.step]);
                if *mollify {
                    let table = ops.mollifier_table(self.mollifier_scale(t)?);
                    for c in s.iter_mut() {
                        ops.apply_mollifier(c, &table);
                    }
                }
                Some(s)
            }
        };
        let mut ud = uh.clone();
        for c in ud.iter_mut() {
            ops.dealias(c);
        }
        let (b, bd) = match &bh {
            Some(bh) => {
                let mut bdh = bh.clone();
                for c in bdh.iter_mut() {
                    ops.dealias(c);
                }
                let all = ops.inverse_many(&[&bh[0], &bh[1], &bh[2], &bdh[0], &bdh[1], &bdh[2], &ud[0], &ud[1], &ud[2]]);
                let mut it = all.into_iter();
                let mut take3 = || VectorField { grid: g, comps: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] };
                let b = take3();
                let bd = take3();
                let udp = take3();
                (Some(b), Some((bd, udp)))
            }
            None => (None, None),
        };
        if let Some(b) = &b {
            let vmax = b.max_abs();
            let h = g.spacing();
            if vmax * dt > self.cfg.cfl * h {
                return Err(Error::Cfl { dt, suggested: 0.9 * self.cfg.cfl * h / vmax });
            }
        }

        // Dealiased products b_i u_j.
        let prod: Option<Vec<Spectrum>> = bd.as_ref().map(|(bd, udp)| {
            let mut products: Vec<Vec<f64>> = Vec::with_capacity(9);
            for i in 0..3 {
                for j in 0..3 {
                    products.push(bd.comps[i].iter().zip(&udp.comps[j]).map(|(x, y)| x * y).collect());
                }
            }
            let refs: Vec<&[f64]> = products.iter().map(|v| v.as_slice()).collect();
            let mut s = ops.forward_many(&refs);
            for c in s.iter_mut() {
                ops.dealias(c);
            }
            s
        });

        // Forcing at the sample time and at the step midpoint.
        let f_now = if t == 0.0 && self.cfg.forcing.singular_at_zero() {
            self.cfg.forcing.at(0.5 * dt, &g)?
        } else {
            self.cfg.forcing.at(t, &g)?
        };
        let fh_now = f_now.as_ref().map(|f| tensor_forward(ops, f));

        // Gradient and pressure for the sample.
        let grad_specs: Vec<Spectrum> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| ops.derivative_hat(&uh[j], i)).collect();
        let grad_refs: Vec<&Spectrum> = grad_specs.iter().collect();
        let grad_flat = ops.inverse_many(&grad_refs);
        let grad_u = tensor_from_flat(g, grad_flat);

        let mut gsum: Vec<Spectrum> = match &prod {
            Some(p) => p.clone(),
            None => vec![vec![Complex64::new(0.0, 0.0); g.len()]; 9],
        };
        if let Some(fh) = &fh_now {
            for (a, f) in gsum.iter_mut().zip(fh) {
                for (x, y) in a.iter_mut().zip(f) {
                    *x -= y;
                }
            }
        }
        let p = ScalarField { grid: g, data: ops.inverse(&ops.pressure_hat(&gsum)) };
        let div_f = fh_now.as_ref().map(|fh| ops.inverse_vector(&divergence_hat_tensor(ops, fh)));

        observe(&Sample {
            step: self.step,
            t,
            dt,
            u: &self.u,
            grad_u: &grad_u,
            p: &p,
            b: b.as_ref(),
            forcing: f_now.as_ref(),
            div_forcing: div_f.as_ref(),
        })?;

        if self.step == self.steps {
            self.step += 1;
            return Ok(false);
        }

        // Nonlinear term N̂_j = -i k_i Ĝ_ij + i k_i F̂_ij(mid).
        let f_mid = self.cfg.forcing.at(t + 0.5 * dt, &g)?;
        let fh_mid = match (&f_mid, &f_now) {
            (Some(fm), Some(fn_)) if fm == fn_ => fh_now.clone(),
            (Some(fm), _) => Some(tensor_forward(ops, fm)),
            _ => None,
        };
        let mut rhs: Vec<Spectrum> = match &prod {
            Some(p) => p.iter().map(|s| s.iter().map(|v| -v).collect()).collect(),
            None => vec![vec![Complex64::new(0.0, 0.0); g.len()]; 9],
        };
        if let Some(fh) = &fh_mid {
            for (a, f) in rhs.iter_mut().zip(fh) {
                for (x, y) in a.iter_mut().zip(f) {
                    *x += y;
                }
            }
        }
        let mut nh = divergence_hat_tensor(ops, &rhs);
        ops.leray_hat(&mut nh);
        let mut next = uh;
        for c in 0..3 {
            for (idx, v) in next[c].iter_mut().enumerate() {
                *v = self.decay[idx] * *v + self.phi[idx] * nh[c][idx];
            }
        }
        self.u = ops.inverse_vector(&next);
        self.step += 1;
        Ok(true)
    }

    fn mollifier_scale(&self, t: f64) -> Result<f64> {
        let m = &self.cfg.mollifier;
        if m.time_dependent && t == 0.0 {
            return m.scale(Some(self.cfg.dt));
        }
        m.scale(Some(t))
    }
}

fn tensor_forward(ops: &SpectralOps, f: &TensorField) -> Vec<Spectrum> {
    let refs: Vec<&[f64]> = f.comps.iter().flatten().map(|v| v.as_slice()).collect();
    ops.forward_many(&refs)
}

fn tensor_from_flat(g: GridSpec, flat: Vec<Vec<f64>>) -> TensorField {
    let mut it = flat.into_iter();
    let comps = core::array::from_fn(|_| core::array::from_fn(|_| it.next().unwrap()));
    TensorField { grid: g, comps }
}

/// `(∇·G)_j = Σ_i i k_i Ĝ_ij` for a row-major list of nine spectra.
fn divergence_hat_tensor(ops: &SpectralOps, g: &[Spectrum]) -> [Spectrum; 3] {
    let len = g[0].len();
    let mut out: [Spectrum; 3] = core::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); len]);
    ops.for_each_mode(|idx, k, _| {
        for j in 0..3 {
            out[j][idx] = I * (k[0] * g[j][idx] + k[1] * g[3 + j][idx] + k[2] * g[6 + j][idx]);
        }
    });
    out
}

/// Runs to the horizon, feeding every sample to `observe`; returns the final
/// velocity.
pub fn run(ops: &SpectralOps, u0: &VectorField, cfg: &SolverConfig, observe: &mut dyn FnMut(&Sample) -> Result<()>) -> Result<VectorField> {
    let mut s = Solver::new(ops, cfg, u0.clone())?;
    while s.advance(observe)? {}
    Ok(s.u)
}

/// Runs to the horizon and keeps every state.
pub fn run_collect(ops: &SpectralOps, u0: &VectorField, cfg: &SolverConfig) -> Result<Vec<FlowState>> {
    let mut out = Vec::with_capacity(cfg.steps()? + 1);
    run(ops, u0, cfg, &mut |s| {
        out.push(FlowState { t: s.t, u: s.u.clone(), p: s.p.clone() });
        Ok(())
    })?;
    Ok(out)
}

/// The advection–diffusion problem for a prescribed `b` trajectory.
pub fn run_ad(ops: &SpectralOps, b: &[VectorField], u0: &VectorField, cfg: &SolverConfig, mollify: bool) -> Result<Vec<FlowState>> {
    let cfg = cfg.with_advection(Advection::Prescribed { samples: b.to_vec(), mollify });
    run_collect(ops, u0, &cfg)
}

/// Seed of the perturbation used by [`uniqueness_probe`].
pub const PROBE_NOISE_SEED: u64 = 0x0DD5;

/// `sup_t ‖u₁ - u₂‖_{L²_w} / δ` for two runs from `u0` and
/// `u0 + δ·noise`, stepped in lockstep. Returns 0 for `δ = 0`.
pub fn uniqueness_probe(ops: &SpectralOps, u0: &VectorField, cfg: &SolverConfig, delta: f64, w: &WeightSpec) -> Result<f64> {
    let table = WeightTable::new(*ops.grid(), *w);
    let noise = random_solenoidal(ops, PROBE_NOISE_SEED, 2.0);
    let mut u1 = u0.clone();
    u1.axpy(delta, &noise)?;
    let mut a = Solver::new(ops, cfg, u0.clone())?;
    let mut b = Solver::new(ops, cfg, u1)?;
    let mut worst: f64 = 0.0;
    loop {
        let diff = b.u().sub(a.u())?;
        worst = worst.max(weighted_norm_with(&diff, 2.0, &table)?);
        let more_a = a.advance(&mut |_| Ok(()))?;
        let more_b = b.advance(&mut |_| Ok(()))?;
        if !(more_a && more_b) {
            break;
        }
    }
    Ok(if delta == 0.0 { 0.0 } else { worst / delta })
}

/// Spatial bump `(1 - |x-c|²/s²)⁴` on the ball of radius `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump4 {
    pub center: [f64; 3],
    pub scale: f64,
}

impl Bump4 {
    /// Value, gradient and Laplacian at `x`; `None` outside the support.
    pub fn eval(&self, x: [f64; 3]) -> Option<(f64, [f64; 3], f64)> {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let s2 = self.scale * self.scale;
        let rho2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / s2;
        if rho2 >= 1.0 {
            return None;
        }
        let q = 1.0 - rho2;
        let q2 = q * q;
        let grad = d.map(|v| -8.0 * q2 * q * v / s2);
        let lap = -24.0 * q2 / s2 * (q - 2.0 * rho2);
        Some((q2 * q2, grad, lap))
    }
}

/// Bump dictionary: centres on a lattice of spacing `s` with
/// `|c_i| <= L - s`, for each scale `s = m h`.
pub fn bump_dictionary(g: &GridSpec, multiples: &[f64]) -> Vec<Bump4> {
    let mut out = Vec::new();
    let l = g.half_width();
    for m in multiples {
        let s = m * g.spacing();
        let reach = libm::floor((l - s) / s + 1e-9) as i64;
        if reach < 0 {
            continue;
        }
        for a in -reach..=reach {
            for b in -reach..=reach {
                for c in -reach..=reach {
                    out.push(Bump4 { center: [a as f64 * s, b as f64 * s, c as f64 * s], scale: s });
                }
            }
        }
    }
    out
}

/// Default bump scales in grid spacings.
pub const BUMP_SCALES: [f64; 2] = [8.0, 16.0];

/// One dictionary entry's pairing with the defect measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectPairing {
    pub center_step: usize,
    pub t: f64,
    pub bump: Bump4,
    pub value: f64,
}

/// Streaming accumulator of `⟨μ, Φ⟩` over hats spanning four steps times
/// the bump dictionary.
#[derive(Debug, Clone)]
pub struct DefectAccumulator {
    bumps: Vec<Bump4>,
    /// Per sample: `∫ e ψ` for each bump.
    energy: Vec<Vec<f64>>,
    /// Per sample: spatial part of the balance for each bump.
    flux: Vec<Vec<f64>>,
    times: Vec<f64>,
    dt: f64,
}

impl DefectAccumulator {
    pub fn new(g: &GridSpec, scales: &[f64]) -> Self {
        Self { bumps: bump_dictionary(g, scales), energy: Vec::new(), flux: Vec::new(), times: Vec::new(), dt: 0.0 }
    }

    pub fn bumps(&self) -> &[Bump4] {
        &self.bumps
    }

    pub fn observe(&mut self, s: &Sample) -> Result<()> {
        let g = s.u.grid;
        let n = g.n();
        let h = g.spacing();
        let l = g.half_width();
        let vol = g.cell_volume();
        let mut e_row = vec![0.0; self.bumps.len()];
        let mut f_row = vec![0.0; self.bumps.len()];
        for (bi, bump) in self.bumps.iter().enumerate() {
            let lo = |c: f64| libm::ceil((c - bump.scale + l) / h).max(0.0) as usize;
            let hi = |c: f64| (libm::floor((c + bump.scale + l) / h) as usize).min(n - 1);
            let (mut ei, mut fi) = (0.0, 0.0);
            for a in lo(bump.center[0])..=hi(bump.center[0]) {
                for b in lo(bump.center[1])..=hi(bump.center[1]) {
                    for c in lo(bump.center[2])..=hi(bump.center[2]) {
                        let idx = g.index(a, b, c);
                        let x = g.point(idx);
                        let Some((psi, dpsi, lap)) = bump.eval(x) else { continue };
                        let u = s.u.at(idx);
                        let e = 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
                        let mut grad2 = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                grad2 += s.grad_u.comps[i][j][idx] * s.grad_u.comps[i][j][idx];
                            }
                        }
                        let udp = u[0] * dpsi[0] + u[1] * dpsi[1] + u[2] * dpsi[2];
                        let mut term = -e * lap + grad2 * psi - s.p.data[idx] * udp;
                        if let Some(b) = s.b {
                            let bv = b.at(idx);
                            term -= e * (bv[0] * dpsi[0] + bv[1] * dpsi[1] + bv[2] * dpsi[2]);
                        }
                        if let Some(df) = s.div_forcing {
                            let d = df.at(idx);
                            term -= (u[0] * d[0] + u[1] * d[1] + u[2] * d[2]) * psi;
                        }
                        ei += e * psi;
                        fi += term;
                    }
                }
            }
            e_row[bi] = ei * vol;
            f_row[bi] = fi * vol;
        }
        self.energy.push(e_row);
        self.flux.push(f_row);
        self.times.push(s.t);
        self.dt = s.dt;
        Ok(())
    }

    /// Pairings for every hat centred at an even step with a full window.
    pub fn finish(&self) -> Result<Vec<DefectPairing>> {
        let m = self.times.len();
        if m < 3 {
            return Err(Error::TooFewSamples { needed: 3, got: m });
        }
        let dt = self.dt;
        let mut out = Vec::new();
        let mut c = 2;
        while c + 2 < m {
            for (bi, bump) in self.bumps.iter().enumerate() {
                let e = |k: usize| self.energy[k][bi];
                let rise = 0.5 * e(c - 2) + e(c - 1) + 0.5 * e(c);
                let fall = 0.5 * e(c) + e(c + 1) + 0.5 * e(c + 2);
                let time_term = 0.5 * (rise - fall);
                let f = |k: usize| self.flux[k][bi];
                let space = dt * (0.5 * f(c - 1) + f(c) + 0.5 * f(c + 1));
                out.push(DefectPairing { center_step: c, t: self.times[c], bump: *bump, value: time_term - space });
            }
            c += 2;
        }
        if out.is_empty() {
            // Three or four samples: one hat centred at step 1 or 2 with a
            // two-step window.
            let c = m / 2;
            for (bi, bump) in self.bumps.iter().enumerate() {
                let e = |k: usize| self.energy[k][bi];
                let f = |k: usize| self.flux[k][bi];
                let time_term = 0.5 * (e(c - 1) - e(c + 1));
                let space = dt * (0.25 * f(c - 1) + 0.5 * f(c) + 0.25 * f(c + 1));
                out.push(DefectPairing { center_step: c, t: self.times[c], bump: *bump, value: time_term - space });
            }
        }
        Ok(out)
    }
}

/// Runs `cfg` from `u0` and returns `⟨μ, Φ⟩` over the dictionary at the
/// given bump scales.
pub fn energy_balance_residual(ops: &SpectralOps, u0: &VectorField, cfg: &SolverConfig, scales: &[f64]) -> Result<Vec<DefectPairing>> {
    let mut acc = DefectAccumulator::new(ops.grid(), scales);
    run(ops, u0, cfg, &mut |s| acc.observe(s))?;
    acc.finish()
}
