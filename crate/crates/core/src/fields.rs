//! Initial data and forcing tensors: truncated data, discretely
//! self-similar fields, homogeneous fields, self-similar forcing, and the
//! shell diagnostics used to check scale invariance.

use crate::error::{invalid, Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::{norm3, GridSpec};
use crate::quadrature::GaussLegendre;
use crate::region::shell_fraction;
use crate::spectral::SpectralOps;
use crate::weights::{WeightSpec, WeightTable};
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// C∞ transition from 0 on `x <= 0` to 1 on `x >= 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = libm::exp(-1.0 / x);
    let b = libm::exp(-1.0 / (1.0 - x));
    a / (a + b)
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let a = libm::exp(-1.0 / x);
    let b = libm::exp(-1.0 / (1.0 - x));
    let s = a + b;
    a * b * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x))) / (s * s)
}

/// Cutoff equal to 1 on `s <= 1` and 0 on `s >= 2`.
pub fn cutoff(s: f64) -> f64 {
    1.0 - smooth_step(s - 1.0)
}

/// `P(φ(|x|/R) u0)`.
pub fn truncate_data(ops: &SpectralOps, u0: &VectorField, radius: f64) -> Result<VectorField> {
    if !(radius > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    let g = u0.grid;
    let mut v = u0.clone();
    for (idx, x) in g.points().enumerate() {
        let phi = cutoff(norm3(x) / radius);
        for c in 0..3 {
            v.comps[c][idx] *= phi;
        }
    }
    Ok(ops.leray_project(&v))
}

/// Radial envelope that zeroes the singular core and tapers the field
/// before the box faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    /// Field is zero for `r <= core`.
    pub core: f64,
    /// Width of the ramp from 0 to 1 after the core.
    pub core_ramp: f64,
    /// Field is zero for `r >= outer`.
    pub outer: f64,
    /// Width of the ramp from 1 to 0 before `outer`.
    pub outer_ramp: f64,
}

impl Envelope {
    /// Core radius `4h`, ramps of `4h` and `8h`, zero from `L - h`.
    pub fn for_grid(g: &GridSpec) -> Self {
        let h = g.spacing();
        Self { core: 4.0 * h, core_ramp: 4.0 * h, outer: g.half_width() - h, outer_ramp: 8.0 * h }
    }

    /// Core radius `4h` with ramps of `width` cells on both sides.
    pub fn wide(g: &GridSpec, width: f64) -> Self {
        let h = g.spacing();
        Self { core: 4.0 * h, core_ramp: width * h, outer: g.half_width() - 0.5 * h, outer_ramp: width * h }
    }

    pub fn value(&self, r: f64) -> f64 {
        smooth_step((r - self.core) / self.core_ramp) * (1.0 - smooth_step((r - (self.outer - self.outer_ramp)) / self.outer_ramp))
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let xi = (r - self.core) / self.core_ramp;
        let xo = (r - (self.outer - self.outer_ramp)) / self.outer_ramp;
        smooth_step_deriv(xi) / self.core_ramp * (1.0 - smooth_step(xo)) - smooth_step(xi) * smooth_step_deriv(xo) / self.outer_ramp
    }

    /// Radius from which the envelope equals 1.
    pub fn clean_inner(&self) -> f64 {
        self.core + self.core_ramp
    }

    /// Radius up to which the envelope equals 1.
    pub fn clean_outer(&self) -> f64 {
        self.outer - self.outer_ramp
    }
}

/// One divergence-free plane wave `amp cos(k·y + phase)`, `amp ⟂ k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub k: [f64; 3],
    pub amp: [f64; 3],
    pub phase: f64,
}

/// Random band-limited solenoidal function given as a sum of plane waves.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSum {
    pub waves: Vec<Wave>,
}

impl WaveSum {
    /// `count` waves with `|k|` uniform in `[k_lo, k_hi]`.
    pub fn random(seed: u64, count: usize, k_lo: f64, k_hi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut waves = Vec::with_capacity(count);
        for _ in 0..count {
            let dir = unit(core::array::from_fn(|_| StandardNormal.sample(&mut rng)));
            let kmag = k_lo + (k_hi - k_lo) * rng.random::<f64>();
            let k = dir.map(|v| v * kmag);
            let a: [f64; 3] = core::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let amp = cross(a, dir).map(|v| v / libm::sqrt(count as f64));
            let phase = 2.0 * PI * rng.random::<f64>();
            waves.push(Wave { k, amp, phase });
        }
        Self { waves }
    }

    /// Vector potential `A` with `curl A = eval`.
    pub fn potential(&self, y: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for w in &self.waves {
            let k2 = w.k[0] * w.k[0] + w.k[1] * w.k[1] + w.k[2] * w.k[2];
            let c = cross(w.k, w.amp);
            let sn = libm::sin(w.k[0] * y[0] + w.k[1] * y[1] + w.k[2] * y[2] + w.phase);
            for i in 0..3 {
                out[i] -= c[i] / k2 * sn;
            }
        }
        out
    }

    pub fn eval(&self, y: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for w in &self.waves {
            let c = libm::cos(w.k[0] * y[0] + w.k[1] * y[1] + w.k[2] * y[2] + w.phase);
            for i in 0..3 {
                out[i] += w.amp[i] * c;
            }
        }
        out
    }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    v.map(|x| x / n)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Default seed of the random shell profile.
pub const SHELL_SEED: u64 = 0xD55;

/// Profile on the base annulus `1 < |y| <= λ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ShellProfile {
    Zero,
    /// Random plane-wave sum, scaled by `amplitude`.
    Random { seed: u64, amplitude: f64 },
    /// User field, read by trilinear interpolation; must cover `|y| <= λ`.
    Sampled(VectorField),
}

/// Discretely self-similar data: `u(x) = λ u(λx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DssSpec {
    pub lambda: f64,
    pub gamma: f64,
    pub profile: ShellProfile,
}

impl DssSpec {
    pub fn new(lambda: f64, gamma: f64, profile: ShellProfile) -> Result<Self> {
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(invalid("lambda", "must exceed 1"));
        }
        if !(gamma > 1.0 && gamma <= 2.0) {
            return Err(invalid("gamma", "must lie in (1, 2]"));
        }
        Ok(Self { lambda, gamma, profile })
    }
}

/// Number of plane waves in the random shell profile.
pub const PROFILE_WAVES: usize = 24;
/// Wavenumber band of the random shell profile on the base annulus.
pub const PROFILE_BAND: (f64, f64) = (2.0, 3.0);

/// Fraction of the log-width over which the profile is blended into its
/// rescaled copy. A narrower seam is not resolved on the innermost shells.
const BLEND: f64 = 1.0;

/// Shell index `k` with `λ^k < r <= λ^(k+1)`.
pub fn shell_index(r: f64, lambda: f64) -> i32 {
    let mut k = libm::floor(libm::log(r) / libm::log(lambda)) as i32;
    // Guard against rounding at exact powers.
    while libm::pow(lambda, k as f64) >= r {
        k -= 1;
    }
    while libm::pow(lambda, (k + 1) as f64) < r {
        k += 1;
    }
    k
}

/// Extends the shell profile by the scaling rule, applies the envelope and
/// projects.
pub fn make_dss_field(ops: &SpectralOps, spec: &DssSpec, env: &Envelope) -> Result<VectorField> {
    let u = dss_samples(ops.grid(), spec, env)?;
    Ok(ops.leray_project(&u))
}

fn seam_blend(s: f64) -> (f64, f64) {
    let z = PI * (s - 1.0 + BLEND) / BLEND;
    if z <= 0.0 {
        (0.0, 0.0)
    } else {
        (0.5 * (1.0 - libm::cos(z)), 0.5 * PI / BLEND * libm::sin(z))
    }
}

/// The DSS extension with envelope, before projection.
///
/// Random profiles are the analytic curl of an enveloped degree-zero
/// potential blended across the seam, so the samples are solenoidal in the
/// continuum. Sampled profiles blend the velocity directly.
pub fn dss_samples(g: &GridSpec, spec: &DssSpec, env: &Envelope) -> Result<VectorField> {
    let lam = spec.lambda;
    if !(lam > 1.0) {
        return Err(invalid("lambda", "must exceed 1"));
    }
    let ln_lam = libm::log(lam);
    // (χ, χ', shell scale, base-annulus point, log-position in the shell)
    let locate = |x: [f64; 3]| -> Option<(f64, f64, f64, [f64; 3], f64)> {
        let r = norm3(x);
        let chi = env.value(r);
        if chi == 0.0 {
            return None;
        }
        let scale = libm::pow(lam, shell_index(r, lam) as f64);
        Some((chi, env.deriv(r), scale, x.map(|v| v / scale), libm::log(r / scale) / ln_lam))
    };
    let u = match &spec.profile {
        ShellProfile::Zero => VectorField::zeros(*g),
        ShellProfile::Random { seed, amplitude } => {
            let waves = WaveSum::random(*seed, PROFILE_WAVES, PROFILE_BAND.0, PROFILE_BAND.1);
            VectorField::from_fn(*g, |x| {
                let Some((chi, dchi, scale, y, s)) = locate(x) else { return [0.0; 3] };
                let (beta, dbeta) = seam_blend(s);
                let a0 = waves.potential(y);
                let u0 = waves.eval(y);
                let (pot, curl) = if beta == 0.0 {
                    (a0, u0)
                } else {
                    let yl = y.map(|v| v / lam);
                    let a1 = waves.potential(yl);
                    let u1 = waves.eval(yl);
                    let ry2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
                    let grad_beta = y.map(|v| v * dbeta / (ry2 * ln_lam));
                    let diff: [f64; 3] = core::array::from_fn(|i| a1[i] - a0[i]);
                    let jump = cross(grad_beta, diff);
                    (
                        core::array::from_fn(|i| (1.0 - beta) * a0[i] + beta * a1[i]),
                        core::array::from_fn(|i| (1.0 - beta) * u0[i] + beta * u1[i] / lam + jump[i]),
                    )
                };
                let r = norm3(x);
                let edge = cross(x.map(|v| dchi * v / r), pot);
                core::array::from_fn(|i| amplitude * (chi * curl[i] / scale + edge[i]))
            })
        }
        ShellProfile::Sampled(f) => VectorField::from_fn(*g, |x| {
            let Some((chi, _, scale, y, s)) = locate(x) else { return [0.0; 3] };
            let (beta, _) = seam_blend(s);
            let a = trilinear_vector(f, y).unwrap_or([0.0; 3]);
            let b = if beta == 0.0 { [0.0; 3] } else { trilinear_vector(f, y.map(|v| v / lam)).unwrap_or([0.0; 3]) };
            core::array::from_fn(|i| chi * ((1.0 - beta) * a[i] + beta * b[i] / lam) / scale)
        }),
    };
    Ok(u)
}

/// `χ(|x|) w0(x/|x|)/|x|`, projected.
pub fn make_self_similar_field(ops: &SpectralOps, w0: impl Fn([f64; 3]) -> [f64; 3], env: &Envelope) -> VectorField {
    let u = self_similar_samples(ops.grid(), w0, env);
    ops.leray_project(&u)
}

/// The homogeneous field before projection.
pub fn self_similar_samples(g: &GridSpec, w0: impl Fn([f64; 3]) -> [f64; 3], env: &Envelope) -> VectorField {
    VectorField::from_fn(*g, |x| {
        let r = norm3(x);
        let chi = env.value(r);
        if chi == 0.0 {
            return [0.0; 3];
        }
        w0(x.map(|v| v / r)).map(|v| chi * v / r)
    })
}

/// Periodic trilinear interpolation; `None` outside the box.
pub fn trilinear(g: &GridSpec, data: &[f64], x: [f64; 3]) -> Option<f64> {
    let l = g.half_width();
    if x.iter().any(|v| v.abs() > l * (1.0 + 1e-12)) {
        return None;
    }
    let n = g.n();
    let h = g.spacing();
    let mut base = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..3 {
        let p = (x[a] + l) / h;
        let f = libm::floor(p);
        t[a] = p - f;
        base[a] = (f as i64).rem_euclid(n as i64) as usize;
    }
    let mut acc = 0.0;
    for da in 0..2 {
        let wa = if da == 0 { 1.0 - t[0] } else { t[0] };
        if wa == 0.0 {
            continue;
        }
        for db in 0..2 {
            let wb = if db == 0 { 1.0 - t[1] } else { t[1] };
            if wb == 0.0 {
                continue;
            }
            for dc in 0..2 {
                let wc = if dc == 0 { 1.0 - t[2] } else { t[2] };
                if wc == 0.0 {
                    continue;
                }
                let idx = g.index((base[0] + da) % n, (base[1] + db) % n, (base[2] + dc) % n);
                acc += wa * wb * wc * data[idx];
            }
        }
    }
    Some(acc)
}

pub fn trilinear_vector(f: &VectorField, x: [f64; 3]) -> Option<[f64; 3]> {
    Some([
        trilinear(&f.grid, &f.comps[0], x)?,
        trilinear(&f.grid, &f.comps[1], x)?,
        trilinear(&f.grid, &f.comps[2], x)?,
    ])
}

/// `‖u(x) - λ u(λx)‖ / ‖u‖` over nodes with `r_lo <= |x| <= r_hi`.
pub fn dss_drift(u: &VectorField, lambda: f64, r_lo: f64, r_hi: f64) -> f64 {
    let g = u.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for (idx, x) in g.points().enumerate() {
        let r = norm3(x);
        if r < r_lo || r > r_hi {
            continue;
        }
        let v = u.at(idx);
        let Some(w) = trilinear_vector(u, x.map(|c| c * lambda)) else { continue };
        for c in 0..3 {
            let d = v[c] - lambda * w[c];
            num += d * d;
            den += v[c] * v[c];
        }
    }
    if den == 0.0 {
        0.0
    } else {
        libm::sqrt(num / den)
    }
}

/// Drift between two samples related by the parabolic rescaling:
/// `‖u(t,x) - λ v(λx)‖ / ‖u(t,·)‖` where `v = u(λ² t)`.
pub fn paired_drift(u: &VectorField, v: &VectorField, lambda: f64, r_lo: f64, r_hi: f64) -> f64 {
    let g = u.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for (idx, x) in g.points().enumerate() {
        let r = norm3(x);
        if r < r_lo || r > r_hi {
            continue;
        }
        let a = u.at(idx);
        let Some(b) = trilinear_vector(v, x.map(|c| c * lambda)) else { continue };
        for c in 0..3 {
            let d = a[c] - lambda * b[c];
            num += d * d;
            den += a[c] * a[c];
        }
    }
    if den == 0.0 {
        0.0
    } else {
        libm::sqrt(num / den)
    }
}

/// Default drift region for an envelope: clean inner radius to the largest
/// radius whose dilation stays clean.
pub fn drift_region(env: &Envelope, lambda: f64) -> (f64, f64) {
    (env.clean_inner(), env.clean_outer() / lambda)
}

/// Unweighted `∫ |u|²` over `r_in < |x| <= r_out` with cell fractions.
pub fn shell_integral(u: &VectorField, r_in: f64, r_out: f64) -> f64 {
    let frac = shell_fraction(&u.grid, [0.0; 3], r_in, r_out);
    let mut s = 0.0;
    for (idx, f) in frac.iter().enumerate() {
        if *f > 0.0 {
            let v = u.at(idx);
            s += f * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
    }
    s * u.grid.cell_volume()
}

/// Weighted energy against base-shell energy for DSS data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DssNormReport {
    /// `‖u‖²` in `L²(w_γ)`.
    pub full: f64,
    /// Base-annulus energy inferred from the reference shell.
    pub shell: f64,
    /// `full / shell`, `None` when `shell = 0`.
    pub ratio: Option<f64>,
    /// Lower series bound over fully resolved shells.
    pub lower: f64,
    /// Upper series bound over every shell meeting the support.
    pub upper: f64,
    /// Set when the shell energy vanishes.
    pub flagged: bool,
    /// Reference shell index.
    pub reference: i32,
}

/// Shell indices fully inside the envelope's clean zone.
pub fn clean_shells(env: &Envelope, lambda: f64) -> Vec<i32> {
    let lo = shell_index(env.clean_inner(), lambda) + 1;
    let mut out = Vec::new();
    let mut k = lo;
    while libm::pow(lambda, (k + 1) as f64) <= env.clean_outer() {
        if libm::pow(lambda, k as f64) >= env.clean_inner() {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Norm equivalence check against the first clean shell.
pub fn dss_norm_equivalence(u: &VectorField, spec: &DssSpec, env: &Envelope) -> Result<DssNormReport> {
    let k = clean_shells(env, spec.lambda).first().copied().ok_or(Error::Unsupported("no fully resolved shell in the box"))?;
    dss_norm_equivalence_at(u, spec, env, k)
}

/// Norm equivalence check against shell `reference`.
pub fn dss_norm_equivalence_at(u: &VectorField, spec: &DssSpec, env: &Envelope, reference: i32) -> Result<DssNormReport> {
    let lam = spec.lambda;
    let w = WeightSpec::plain(spec.gamma)?;
    let table = WeightTable::new(u.grid, w);
    let full = crate::weights::weighted_norm_with(u, 2.0, &table)?;
    let full = full * full;
    let lk = libm::pow(lam, reference as f64);
    let shell = shell_integral(u, lk, lk * lam) / lk;
    let clean = clean_shells(env, lam);
    let lower: f64 = clean.iter().map(|k| {
        let lk = libm::pow(lam, *k as f64);
        lk * libm::pow(1.0 + lk * lam, -spec.gamma)
    })
    .sum();
    let corner = u.grid.half_width() * libm::sqrt(3.0);
    let mut upper = 0.0;
    let mut k = shell_index(env.core, lam);
    while libm::pow(lam, k as f64) < corner {
        let lk = libm::pow(lam, k as f64);
        upper += lk * libm::pow(1.0 + lk, -spec.gamma);
        k += 1;
    }
    let flagged = shell == 0.0;
    Ok(DssNormReport { full, shell, ratio: if flagged { None } else { Some(full / shell) }, lower, upper, flagged, reference })
}

/// `Σ_k λ^k (1+λ^k)^-γ` over `k_lo..=k_hi`.
pub fn shell_series(lambda: f64, gamma: f64, k_lo: i32, k_hi: i32) -> f64 {
    (k_lo..=k_hi)
        .map(|k| {
            let lk = libm::pow(lambda, k as f64);
            lk * libm::pow(1.0 + lk, -gamma)
        })
        .sum()
}

/// Kind and data of the forcing tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    /// `F(t,x) = F0(x/√t)/t`.
    SelfSimilar { profile: TensorField },
    /// Self-similar law modulated periodically in `log_{λ²} t`.
    Dss { profile: TensorField, lambda: f64, modulation: f64 },
    /// Time-independent tensor on the run grid.
    Explicit(TensorField),
}

impl ForcingSpec {
    /// Self-similar forcing; rejects profiles with infinite `∫|F0|²/|x|`.
    pub fn self_similar(profile: TensorField) -> Result<Self> {
        let v = inverse_radius_integral(&profile);
        if !v.is_finite() {
            return Err(invalid("F0", "∫|F0|²/|x| must be finite"));
        }
        Ok(Self::SelfSimilar { profile })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForcingSpec::Zero => true,
            ForcingSpec::SelfSimilar { profile } | ForcingSpec::Dss { profile, .. } => profile.is_zero(),
            ForcingSpec::Explicit(f) => f.is_zero(),
        }
    }

    /// Whether the amplitude is singular at `t = 0`.
    pub fn singular_at_zero(&self) -> bool {
        matches!(self, ForcingSpec::SelfSimilar { .. } | ForcingSpec::Dss { .. })
    }

    /// Tensor at time `t` on grid `g`; `None` for zero forcing.
    pub fn at(&self, t: f64, g: &GridSpec) -> Result<Option<TensorField>> {
        match self {
            ForcingSpec::Zero => Ok(None),
            ForcingSpec::SelfSimilar { profile } => Ok(Some(make_ss_forcing(profile, t, g)?)),
            ForcingSpec::Dss { profile, lambda, modulation } => {
                let mut f = make_ss_forcing(profile, t, g)?;
                let phase = libm::log(t) / libm::log(lambda * lambda);
                f.scale(1.0 + modulation * libm::cos(2.0 * PI * phase));
                Ok(Some(f))
            }
            ForcingSpec::Explicit(f) => {
                if f.grid != *g {
                    return Err(Error::GridMismatch);
                }
                Ok(Some(f.clone()))
            }
        }
    }
}

/// `F0(x/√t)/t` sampled on `g` by trilinear interpolation of `F0`.
pub fn make_ss_forcing(f0: &TensorField, t: f64, g: &GridSpec) -> Result<TensorField> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let st = libm::sqrt(t);
    let mut out = TensorField::zeros(*g);
    if f0.is_zero() {
        return Ok(out);
    }
    for (idx, x) in g.points().enumerate() {
        let y = x.map(|v| v / st);
        for i in 0..3 {
            for j in 0..3 {
                out.comps[i][j][idx] = trilinear(&f0.grid, &f0.comps[i][j], y).unwrap_or(0.0) / t;
            }
        }
    }
    Ok(out)
}

/// `∫₀^∞ ‖F(t)‖²_{L²_w} dt` for `F(t) = F0(x/√t)/t`, sampling `F(t)` with
/// [`make_ss_forcing`] on the grid of `F0` dilated by `√t`.
///
/// The time integral runs in `s = √t` on the half line. A profile that is
/// nonzero at the origin node makes the discrete integral diverge.
pub fn ss_forcing_spacetime_norm(f0: &TensorField, w: &WeightSpec, order: usize, panels: usize) -> Result<f64> {
    let gl = GaussLegendre::new(order);
    let g = f0.grid;
    let mut err = None;
    let v = gl.integrate_half_line(panels, |s| {
        if s == 0.0 {
            return 0.0;
        }
        let t = s * s;
        let gt = match g.scaled(s) {
            Ok(gt) => gt,
            Err(e) => {
                err = Some(e);
                return 0.0;
            }
        };
        let f = match make_ss_forcing(f0, t, &gt) {
            Ok(f) => f,
            Err(e) => {
                err = Some(e);
                return 0.0;
            }
        };
        let table = WeightTable::new(gt, *w);
        let sum: f64 = (0..gt.len()).map(|i| f.frob_sq(i) * table.values[i]).sum();
        2.0 * s * sum * gt.cell_volume()
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `∫₀^∞ (1+√θ)^-γ θ^-1/2 dθ`, finite for `γ > 1`.
pub fn ss_forcing_constant(gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(invalid("gamma", "integral diverges for γ <= 1"));
    }
    // θ = s² turns the integrand into 2(1+s)^-γ.
    let gl = GaussLegendre::new(32);
    Ok(gl.integrate_half_line(256, |s| 2.0 * libm::pow(1.0 + s, -gamma)))
}

/// `∫|F0|²/|x|`; the origin cell uses the exact cell average of `1/|x|`.
pub fn inverse_radius_integral(f0: &TensorField) -> f64 {
    let g = f0.grid;
    let h = g.spacing();
    let mut s = 0.0;
    for (idx, x) in g.points().enumerate() {
        let r = norm3(x);
        let f2 = f0.frob_sq(idx);
        if f2 == 0.0 {
            continue;
        }
        s += if r == 0.0 { f2 * ORIGIN_CELL / h } else { f2 / r };
    }
    s * g.cell_volume()
}

/// `∫_{[-1/2,1/2]³} dy/|y|`.
const ORIGIN_CELL: f64 = 2.380_077_380_766_61;

/// Band-limited solenoidal noise with unit unweighted L² norm.
///
/// White noise is filtered by `exp(-|k|²/(2 k_c²))`, dealiased and projected.
pub fn random_solenoidal(ops: &SpectralOps, seed: u64, k_c: f64) -> VectorField {
    let g = *ops.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: [Vec<f64>; 3] = core::array::from_fn(|_| (0..g.len()).map(|_| StandardNormal.sample(&mut rng)).collect());
    let v = VectorField { grid: g, comps: noise };
    let mut s = ops.forward_vector(&v);
    ops.for_each_mode(|idx, _, k2| {
        let f = libm::exp(-k2 / (2.0 * k_c * k_c));
        for c in s.iter_mut() {
            c[idx] *= f;
        }
    });
    for c in s.iter_mut() {
        ops.dealias(c);
    }
    ops.leray_hat(&mut s);
    let mut u = ops.inverse_vector(&s);
    let n = u.l2();
    if n > 0.0 {
        u.scale(1.0 / n);
    }
    u
}

/// Constant-in-time forcing tensor with band-limited entries, each of
/// unweighted L² norm `amplitude`.
pub fn random_forcing(ops: &SpectralOps, seed: u64, k_c: f64, amplitude: f64) -> TensorField {
    let mut f = TensorField::zeros(*ops.grid());
    for i in 0..3 {
        for j in 0..3 {
            let s = random_scalar(ops, seed.wrapping_add((3 * i + j) as u64), k_c);
            f.comps[i][j] = s.data.iter().map(|v| amplitude * v).collect();
        }
    }
    f
}

/// Profile `F0(y) = amplitude · exp(-|y|²) A` with a fixed traceless `A`.
pub fn gaussian_forcing_profile(g: &GridSpec, amplitude: f64) -> TensorField {
    const A: [[f64; 3]; 3] = [[0.0, 1.0, 0.5], [-0.5, 0.0, 1.0], [0.25, -1.0, 0.0]];
    TensorField::from_fn(*g, |x| {
        let e = amplitude * libm::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
        A.map(|row| row.map(|a| a * e))
    })
}

/// Band-limited scalar noise with unit unweighted L² norm.
pub fn random_scalar(ops: &SpectralOps, seed: u64, k_c: f64) -> ScalarField {
    let g = *ops.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..g.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut s = ops.forward(&noise);
    ops.for_each_mode(|idx, _, k2| s[idx] *= libm::exp(-k2 / (2.0 * k_c * k_c)));
    ops.dealias(&mut s);
    let mut f = ScalarField { grid: g, data: ops.inverse(&s) };
    let n = f.l2();
    if n > 0.0 {
        f.scale(1.0 / n);
    }
    f
}

/// Taylor–Green cell with wavenumber `m π / L` per axis.
pub fn taylor_green(g: &GridSpec, amplitude: f64, m: usize) -> VectorField {
    let k = PI * m as f64 / g.half_width();
    VectorField::from_fn(*g, |x| {
        let (sx, cx) = (libm::sin(k * x[0]), libm::cos(k * x[0]));
        let (sy, cy) = (libm::sin(k * x[1]), libm::cos(k * x[1]));
        let cz = libm::cos(k * x[2]);
        [amplitude * sx * cy * cz, -amplitude * cx * sy * cz, 0.0]
    })
}

/// Curl of `exp(-|x|²/σ²) a` for a fixed oblique axis `a`, projected.
pub fn gaussian_vortex(ops: &SpectralOps, amplitude: f64, sigma: f64) -> VectorField {
    let a = unit([1.0, 0.5, 0.25]);
    let s2 = sigma * sigma;
    let u = VectorField::from_fn(*ops.grid(), |x| {
        let psi = libm::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / s2);
        let grad = x.map(|v| -2.0 * v / s2 * psi);
        cross(grad, a).map(|v| amplitude * v)
    });
    ops.leray_project(&u)
}
