//! Discretely self-similar solutions by fixed-point iteration of the
//! linearised mollified problem, and the space-time norm they live in.
//!
//! The iteration space is `L³((0,T), L³_w)` with `w = (1+|x|)^{-3γ/2}`.
//! For DSS fields this norm is controlled by the unweighted norm on the
//! cell `(0, T/λ²) × B(0, 1/λ)` once `γ > 4/3`.

use crate::dynamics::{run, Advection, Solver, SolverConfig};
use crate::error::{invalid, Error, Result};
use crate::field::VectorField;
use crate::fields::{drift_region, dss_drift, paired_drift, trilinear_vector, Envelope, ForcingSpec};
use crate::grid::{norm3, GridSpec};
use crate::quadrature::{cumulative_trapezoid, trapezoid, GaussLegendre};
use crate::region::{ball_fraction, shell_fraction};
use crate::spectral::SpectralOps;
use crate::weights::{weighted_norm_with, WeightSpec, WeightTable};
use alloc::vec;
use alloc::vec::Vec;

/// Exponent threshold above which cell and full norms are equivalent.
pub const EQUIVALENCE_GAMMA: f64 = 4.0 / 3.0;

/// Full and cell norms of a space-time field.
#[derive(Debug, Clone, PartialEq)]
pub struct XNormReport {
    pub full: f64,
    pub cell: f64,
    /// `full / cell`; `None` when the cell norm vanishes.
    pub ratio: Option<f64>,
    /// Full norm rebuilt from cell-sized pieces via the scaling identity.
    pub reconstructed: Option<f64>,
    /// Whether the norms are equivalent for this `γ`.
    pub equivalent: bool,
}

/// Weight of the iteration space for decay exponent `γ`.
pub fn xnorm_weight(gamma: f64) -> Result<WeightSpec> {
    WeightSpec::plain(1.5 * gamma)
}

fn cubed(v: [f64; 3]) -> f64 {
    let m = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    m * m * m
}

/// `∫ |u|³ m(x)` with `m` given per node.
fn integral_l3(u: &VectorField, m: &[f64]) -> f64 {
    let mut s = 0.0;
    for (idx, f) in m.iter().enumerate() {
        if *f != 0.0 {
            s += f * cubed(u.at(idx));
        }
    }
    s * u.grid.cell_volume()
}

/// Per-node masks used by the norms.
struct Masks {
    weight: Vec<f64>,
    cell: Vec<f64>,
}

impl Masks {
    fn new(g: &GridSpec, lambda: f64, gamma: f64) -> Result<Self> {
        let w = xnorm_weight(gamma)?;
        Ok(Self { weight: WeightTable::new(*g, w).values, cell: ball_fraction(g, [0.0; 3], 1.0 / lambda) })
    }
}

fn check_params(lambda: f64, gamma: f64, t_end: f64) -> Result<()> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "must exceed 1"));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid("gamma", "must be positive"));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid("T", "must be positive"));
    }
    Ok(())
}

/// Integral over `(0, b)` on panels `(b λ^{-2(j+1)}, b λ^{-2j})`, `j < levels`,
/// plus the remaining piece next to zero.
fn integrate_time(gl: &GaussLegendre, b: f64, lambda: f64, levels: usize, f: &mut dyn FnMut(f64) -> Result<f64>) -> Result<f64> {
    let q = lambda * lambda;
    let mut total = 0.0;
    let mut hi = b;
    let mut err = None;
    for _ in 0..levels {
        let lo = hi / q;
        total += gl.integrate(lo, hi, 1, |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        hi = lo;
    }
    total += gl.integrate(0.0, hi, 1, |t| match f(t) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Time quadrature used by [`xnorm_sampled`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRule {
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Geometric panels before the last one reaching zero.
    pub levels: usize,
}

impl Default for TimeRule {
    fn default() -> Self {
        Self { order: 6, levels: 8 }
    }
}

/// Norms of a field known at arbitrary times through `sample`.
///
/// The reconstruction sums the ball term and the shells
/// `λ^{k-1} < |x| < λ^k` rescaled onto `1/λ < |y| < 1`, up to the first
/// shell containing the whole box.
pub fn xnorm_sampled(g: &GridSpec, sample: &mut dyn FnMut(f64) -> Result<VectorField>, lambda: f64, gamma: f64, t_end: f64, rule: TimeRule) -> Result<XNormReport> {
    check_params(lambda, gamma, t_end)?;
    let w = xnorm_weight(gamma)?;
    let masks = Masks::new(g, lambda, gamma)?;
    let gl = GaussLegendre::new(rule.order);

    let corner = g.half_width() * libm::sqrt(3.0);
    let mut shells = 0usize;
    while libm::pow(lambda, shells as f64) < corner {
        shells += 1;
    }
    let annulus = shell_fraction(g, [0.0; 3], 1.0 / lambda, 1.0);
    // Weight evaluated at the rescaled point, per shell.
    let scaled_weight = |k: usize, frac: &[f64]| -> Vec<f64> {
        let s = libm::pow(lambda, k as f64);
        g.points().zip(frac).map(|(x, f)| if *f == 0.0 { 0.0 } else { f * w.at_radius(s * norm3(x)) }).collect()
    };
    let ball_scaled = scaled_weight(1, &masks.cell);
    let shell_masks: Vec<Vec<f64>> = (1..=shells).map(|k| scaled_weight(k, &annulus)).collect();

    let full3 = integrate_time(&gl, t_end, lambda, rule.levels, &mut |t| Ok(integral_l3(&sample(t)?, &masks.weight)))?;
    let q = lambda * lambda;
    let cell3 = integrate_time(&gl, t_end / q, lambda, rule.levels, &mut |t| Ok(integral_l3(&sample(t)?, &masks.cell)))?;

    let mut rec3 = q * integrate_time(&gl, t_end / q, lambda, rule.levels, &mut |t| Ok(integral_l3(&sample(t)?, &ball_scaled)))?;
    for (i, m) in shell_masks.iter().enumerate() {
        let k = (i + 1) as f64;
        let s = libm::pow(q, k);
        rec3 += s * integrate_time(&gl, t_end / s, lambda, rule.levels, &mut |t| Ok(integral_l3(&sample(t)?, m)))?;
    }
    Ok(report(full3, cell3, Some(rec3), gamma))
}

fn report(full3: f64, cell3: f64, rec3: Option<f64>, gamma: f64) -> XNormReport {
    let full = libm::cbrt(full3);
    let cell = libm::cbrt(cell3);
    XNormReport {
        full,
        cell,
        ratio: if cell > 0.0 { Some(full / cell) } else { None },
        reconstructed: rec3.map(libm::cbrt),
        equivalent: gamma > EQUIVALENCE_GAMMA,
    }
}

/// Norms of a stored trajectory sampled every `dt` from `t = 0`, by the
/// trapezoid rule; the cell integral is cut at `T/λ²` by interpolation.
pub fn xnorm_trajectory(traj: &[VectorField], dt: f64, lambda: f64, gamma: f64) -> Result<XNormReport> {
    if traj.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: traj.len() });
    }
    let t_end = dt * (traj.len() - 1) as f64;
    check_params(lambda, gamma, t_end)?;
    let g = traj[0].grid;
    let masks = Masks::new(&g, lambda, gamma)?;
    let full: Vec<f64> = traj.iter().map(|u| integral_l3(u, &masks.weight)).collect();
    let cell: Vec<f64> = traj.iter().map(|u| integral_l3(u, &masks.cell)).collect();
    let cell3 = integral_until(&cell, dt, t_end / (lambda * lambda));
    Ok(report(trapezoid(&full, dt), cell3, None, gamma))
}

/// Trapezoid integral of uniformly sampled values over `(0, t)`.
fn integral_until(samples: &[f64], dt: f64, t: f64) -> f64 {
    let cum = cumulative_trapezoid(samples, dt);
    let pos = t / dt;
    let i = (libm::floor(pos) as usize).min(samples.len() - 1);
    if i + 1 >= samples.len() {
        return cum[samples.len() - 1];
    }
    let frac = pos - i as f64;
    let edge = samples[i] + frac * (samples[i + 1] - samples[i]);
    cum[i] + 0.5 * frac * dt * (samples[i] + edge)
}

/// Cell norm of the difference of two trajectories.
fn cell_difference(a: &[VectorField], b: &[VectorField], dt: f64, lambda: f64, cell: &[f64]) -> Result<f64> {
    let t_end = dt * (a.len() - 1) as f64;
    let mut vals = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        vals.push(integral_l3(&x.sub(y)?, cell));
    }
    Ok(libm::cbrt(integral_until(&vals, dt, t_end / (lambda * lambda))))
}

/// Full norm of the difference of two trajectories.
fn full_difference(a: &[VectorField], b: &[VectorField], dt: f64, weight: &[f64]) -> Result<f64> {
    let mut vals = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        vals.push(integral_l3(&x.sub(y)?, weight));
    }
    Ok(libm::cbrt(trapezoid(&vals, dt)))
}

/// Partial sums `Σ_{k=0}^{K} λ^{k(2 - 3γ/2)}` of the shell series bounding
/// the full norm by the cell norm; bounded in `K` iff `γ > 4/3`.
pub fn shell_partial_sums(lambda: f64, gamma: f64, k_max: usize) -> Vec<f64> {
    let r = libm::pow(lambda, 2.0 - 1.5 * gamma);
    let mut out = Vec::with_capacity(k_max + 1);
    let (mut term, mut sum) = (1.0, 0.0);
    for _ in 0..=k_max {
        sum += term;
        out.push(sum);
        term *= r;
    }
    out
}

/// Bounds on `full / cell` valid for λ-DSS fields, from the ball term and
/// the first `k_max` shells.
pub fn xnorm_ratio_bounds(lambda: f64, gamma: f64, k_max: usize) -> (f64, f64) {
    let d = 1.5 * gamma;
    let q = lambda * lambda;
    let lower = q * libm::pow(2.0, -d);
    let mut upper = 1.0;
    for k in 1..=k_max {
        upper += libm::pow(q, k as f64) * libm::pow(1.0 + libm::pow(lambda, k as f64 - 1.0), -d);
    }
    (libm::cbrt(lower), libm::cbrt(q * upper))
}

/// Diffusion lengths kept between a propagation-drift node and the
/// envelope edges.
pub const PROPAGATION_MARGIN: f64 = 2.0;

/// Drift region for the pair `(s, λ²s)`: the clean region trimmed by
/// `κ√s` at the core and by `κλ√s` at the outer edge of the dilated frame.
pub fn propagation_region(env: &Envelope, lambda: f64, s: f64, kappa: f64) -> Option<(f64, f64)> {
    let lo = env.clean_inner() + kappa * libm::sqrt(s);
    let hi = (env.clean_outer() - kappa * lambda * libm::sqrt(s)) / lambda;
    (hi > lo).then_some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDrift {
    pub s: f64,
    /// Drift on the trimmed region.
    pub trimmed: f64,
    /// Drift on the untrimmed clean region.
    pub full: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport {
    pub initial: f64,
    pub pairs: Vec<PairedDrift>,
}

impl PropagationReport {
    pub fn worst_trimmed(&self) -> f64 {
        self.pairs.iter().map(|p| p.trimmed).fold(0.0, f64::max)
    }

    pub fn worst_full(&self) -> f64 {
        self.pairs.iter().map(|p| p.full).fold(0.0, f64::max)
    }
}

/// Runs `cfg` from `u0` and compares `u(s)` with `λ u(λ²s, λ·)` for every
/// step time `s ∈ [T/λ⁴, T/λ²]`. Needs `λ²` integer.
pub fn dss_propagation(ops: &SpectralOps, u0: &VectorField, cfg: &SolverConfig, env: &Envelope, lambda: f64, kappa: f64) -> Result<PropagationReport> {
    let q = lambda * lambda;
    if libm::fabs(q - libm::round(q)) > 1e-12 {
        return Err(Error::Unsupported("propagation pairs need an integer λ²"));
    }
    let q = libm::round(q) as usize;
    let steps = cfg.steps()?;
    if steps % (q * q) != 0 {
        return Err(invalid("dt", "steps must be divisible by λ⁴"));
    }
    let (lo, hi) = drift_region(env, lambda);
    let initial = dss_drift(u0, lambda, lo, hi);
    let first = steps / (q * q);
    let last = steps / q;
    let mut early: Vec<(usize, VectorField)> = Vec::new();
    let mut pairs = Vec::new();
    let mut err = None;
    run(ops, u0, cfg, &mut |smp| {
        if smp.step >= first && smp.step <= last {
            early.push((smp.step, smp.u.clone()));
        }
        if smp.step % q == 0 && smp.step / q >= first && smp.step / q <= last {
            let n = smp.step / q;
            if let Some((_, a)) = early.iter().find(|(m, _)| *m == n) {
                let s = n as f64 * cfg.dt;
                match propagation_region(env, lambda, s, kappa) {
                    Some((rl, rh)) => pairs.push(PairedDrift { s, trimmed: paired_drift(a, smp.u, lambda, rl, rh), full: paired_drift(a, smp.u, lambda, lo, hi) }),
                    None => err = Some(invalid("kappa", "trimmed region is empty")),
                }
            }
            early.retain(|(m, _)| *m > n);
        }
        Ok(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(PropagationReport { initial, pairs })
}

/// Radius of the a-priori ball in the iteration space.
///
/// On `(0, T₀)` with `K = 1 + ‖u₀‖² + ∫‖F‖²` and `T₀ = min(T, 1/(C K²))`
/// the cubed norm is at most `C T₀^{1/4} K^{3/2}`; each parabolic dilation
/// by `λ²` that reaches `T` multiplies the cubed norm by at most `λ²`.
pub fn apriori_ball(u0_norm: f64, forcing_cum: f64, t_end: f64, lambda: f64, c: f64) -> Result<f64> {
    check_params(lambda, 2.0, t_end)?;
    if !(c > 0.0) || !(u0_norm >= 0.0) || !(forcing_cum >= 0.0) {
        return Err(invalid("apriori", "norms must be non-negative and C positive"));
    }
    let k = 1.0 + u0_norm * u0_norm + forcing_cum;
    let t0 = t_end.min(1.0 / (c * k * k));
    let q = lambda * lambda;
    let mut reach = t0;
    let mut factor = 1.0;
    while reach < t_end * (1.0 - 1e-12) {
        reach *= q;
        factor *= q;
    }
    Ok(libm::cbrt(factor * c * libm::pow(t0, 0.25) * libm::pow(k, 1.5)))
}

/// Runs the linearised problem for an owned advecting trajectory.
/// Returns the (projected) advecting samples and the solution.
fn linear_solve(ops: &SpectralOps, b: Vec<VectorField>, u0: &VectorField, cfg: &SolverConfig) -> Result<(Vec<VectorField>, Vec<VectorField>)> {
    let b: Vec<VectorField> = b.iter().map(|v| ops.leray_project(v)).collect();
    let cfg = cfg.with_advection(Advection::Prescribed { samples: b, mollify: true });
    let mut out = Vec::with_capacity(cfg.steps()? + 1);
    {
        let mut s = Solver::new(ops, &cfg, u0.clone())?;
        while s.advance(&mut |smp| {
            out.push(smp.u.clone());
            Ok(())
        })? {}
    }
    let Advection::Prescribed { samples, .. } = cfg.advection else { unreachable!() };
    Ok((samples, out))
}

/// The solution map `b ↦ u` of the mollified linear problem with initial
/// data `u0`: `b` is Leray-projected and mollified at scale `ε√t`.
pub fn apply_l_eps(ops: &SpectralOps, b: &[VectorField], u0: &VectorField, cfg: &SolverConfig) -> Result<Vec<VectorField>> {
    Ok(linear_solve(ops, b.to_vec(), u0, cfg)?.1)
}

/// Averages every sample (except the initial one) with its images under
/// `u ↦ λ^j u(λ^{2j} t, λ^j x)`, `j = ±1`, at nodes where both radii lie in
/// `region`, then re-projects. Needs `λ²` to be an integer so the images
/// fall on the time grid.
pub fn symmetrize(ops: &SpectralOps, traj: &mut [VectorField], lambda: f64, region: (f64, f64)) -> Result<()> {
    let q = lambda * lambda;
    let qi = libm::round(q);
    if libm::fabs(q - qi) > 1e-12 || qi < 2.0 {
        return Err(Error::Unsupported("symmetrisation needs an integer λ²"));
    }
    let q = qi as usize;
    let n_last = traj.len() - 1;
    let g = *ops.grid();
    let inside = |r: f64| r >= region.0 && r <= region.1;
    let mut fresh = Vec::with_capacity(traj.len());
    for n in 0..=n_last {
        if n == 0 {
            fresh.push(traj[0].clone());
            continue;
        }
        let mut out = traj[n].clone();
        let up = (n * q <= n_last).then(|| &traj[n * q]);
        let down = (n % q == 0).then(|| &traj[n / q]);
        for (idx, x) in g.points().enumerate() {
            let r = norm3(x);
            if !inside(r) {
                continue;
            }
            let mut acc = traj[n].at(idx);
            let mut count = 1.0;
            if let Some(v) = up {
                if inside(r * lambda) {
                    if let Some(p) = trilinear_vector(v, x.map(|c| c * lambda)) {
                        for c in 0..3 {
                            acc[c] += lambda * p[c];
                        }
                        count += 1.0;
                    }
                }
            }
            if let Some(v) = down {
                if inside(r / lambda) {
                    if let Some(p) = trilinear_vector(v, x.map(|c| c / lambda)) {
                        for c in 0..3 {
                            acc[c] += p[c] / lambda;
                        }
                        count += 1.0;
                    }
                }
            }
            for c in 0..3 {
                out.comps[c][idx] = acc[c] / count;
            }
        }
        fresh.push(ops.leray_project(&out));
    }
    for (slot, v) in traj.iter_mut().zip(fresh) {
        *slot = v;
    }
    Ok(())
}

/// Settings of the damped Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions {
    pub lambda: f64,
    pub gamma: f64,
    /// Relaxation `ω` in `v ← (1-ω) v + ω L(v)`.
    pub omega: f64,
    pub max_iter: usize,
    /// Stop once the cell norm of the update falls below this.
    pub tol: f64,
    /// Symmetrise after every this many iterations; `None` disables.
    pub symmetrize_every: Option<usize>,
    /// Radii where symmetrisation acts.
    pub region: Option<(f64, f64)>,
    /// Constant of the a-priori ball, if it should be checked.
    pub c_gamma: Option<f64>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { lambda: 2.0, gamma: 2.0, omega: 0.5, max_iter: 40, tol: 1e-8, symmetrize_every: Some(5), region: None, c_gamma: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointIterate {
    pub k: usize,
    /// Cell norm of `v_{k+1} - v_k`.
    pub residual: f64,
    /// Full norm of `v_{k+1} - v_k`.
    pub residual_full: f64,
    /// Full norm of `v_{k+1}`.
    pub x_norm: f64,
    pub symmetrized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointTrace {
    pub iterates: Vec<FixedPointIterate>,
    pub converged: bool,
    pub relaxation: f64,
    /// A-priori radius, when a constant was supplied.
    pub apriori_radius: Option<f64>,
}

impl FixedPointTrace {
    /// Whether every iterate stayed inside the a-priori ball.
    pub fn inside_ball(&self) -> Option<bool> {
        self.apriori_radius.map(|r| self.iterates.iter().all(|it| it.x_norm <= r))
    }
}

/// `∫₀ᵀ ‖F(t)‖²_{L²_w}` on the step times, with `F(dt/2)` standing in for a
/// forcing singular at zero.
pub fn forcing_cumulative(forcing: &ForcingSpec, g: &GridSpec, w: &WeightSpec, dt: f64, steps: usize) -> Result<f64> {
    if forcing.is_zero() {
        return Ok(0.0);
    }
    let table = WeightTable::new(*g, *w);
    let mut vals = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let t = if n == 0 && forcing.singular_at_zero() { 0.5 * dt } else { n as f64 * dt };
        let v = match forcing.at(t, g)? {
            Some(f) => libm::pow(weighted_norm_with(&f, 2.0, &table)?, 2.0),
            None => 0.0,
        };
        vals.push(v);
    }
    Ok(trapezoid(&vals, dt))
}

/// Damped Picard iteration `v ← (1-ω) v + ω L_ε(v)` started from the
/// Stokes flow of `u0`. `cfg` supplies step, horizon, mollifier and
/// forcing; its advection is ignored.
pub fn fixed_point_iterate(ops: &SpectralOps, u0: &VectorField, cfg: &SolverConfig, opts: &FixedPointOptions) -> Result<(Vec<VectorField>, FixedPointTrace)> {
    check_params(opts.lambda, opts.gamma, cfg.t_end)?;
    if !(opts.omega > 0.0 && opts.omega <= 1.0) {
        return Err(invalid("omega", "must lie in (0, 1]"));
    }
    let g = *ops.grid();
    let dt = cfg.dt;
    let steps = cfg.steps()?;
    let masks = Masks::new(&g, opts.lambda, opts.gamma)?;

    let apriori_radius = match opts.c_gamma {
        Some(c) => {
            let w = WeightSpec::plain(opts.gamma)?;
            let u0n = weighted_norm_with(u0, 2.0, &WeightTable::new(g, w))?;
            let fc = forcing_cumulative(&cfg.forcing, &g, &w, dt, steps)?;
            Some(apriori_ball(u0n, fc, cfg.t_end, opts.lambda, c)?)
        }
        None => None,
    };

    let (_, mut v) = linear_solve(ops, vec![VectorField::zeros(g); steps + 1], u0, cfg)?;
    let mut iterates = Vec::new();
    let mut converged = false;
    for k in 0..opts.max_iter {
        let (vk, lv) = linear_solve(ops, v, u0, cfg)?;
        let mut next = vk.clone();
        for (a, b) in next.iter_mut().zip(&lv) {
            a.scale(1.0 - opts.omega);
            a.axpy(opts.omega, b)?;
        }
        drop(lv);
        let symmetrized = match (opts.symmetrize_every, opts.region) {
            (Some(m), Some(region)) if m > 0 && (k + 1) % m == 0 => {
                symmetrize(ops, &mut next, opts.lambda, region)?;
                true
            }
            _ => false,
        };
        let residual = cell_difference(&next, &vk, dt, opts.lambda, &masks.cell)?;
        let residual_full = full_difference(&next, &vk, dt, &masks.weight)?;
        drop(vk);
        let full: Vec<f64> = next.iter().map(|u| integral_l3(u, &masks.weight)).collect();
        let x_norm = libm::cbrt(trapezoid(&full, dt));
        iterates.push(FixedPointIterate { k, residual, residual_full, x_norm, symmetrized });
        v = next;
        if residual < opts.tol && !symmetrized {
            converged = true;
            break;
        }
    }
    Ok((v, FixedPointTrace { iterates, converged, relaxation: opts.omega, apriori_radius }))
}

/// Cell norm over `(0, T/λ²) × B(0, 1/λ)` of the one-step defect
/// `(v(t+dt) - S_dt v(t)) / dt`, `S_dt` the self-advected mollified step.
pub fn equation_residual(ops: &SpectralOps, traj: &[VectorField], cfg: &SolverConfig, lambda: f64) -> Result<f64> {
    let steps = cfg.steps()?;
    if traj.len() < steps + 1 {
        return Err(Error::TooFewSamples { needed: steps + 1, got: traj.len() });
    }
    let g = *ops.grid();
    let cell = ball_fraction(&g, [0.0; 3], 1.0 / lambda);
    let cut = cfg.t_end / (lambda * lambda);
    let last = ((libm::ceil(cut / cfg.dt - 1e-9)) as usize).min(steps);
    let ns = cfg.with_advection(Advection::SelfMollified);
    let mut vals = Vec::with_capacity(last + 1);
    for n in 0..last {
        let mut s = Solver::at_step(ops, &ns, traj[n].clone(), n)?;
        s.advance(&mut |_| Ok(()))?;
        let mut d = traj[n + 1].sub(s.u())?;
        d.scale(1.0 / cfg.dt);
        vals.push(integral_l3(&d, &cell));
    }
    // Defects are attached to the left end of each step.
    Ok(libm::cbrt(vals.iter().sum::<f64>() * cfg.dt))
}
