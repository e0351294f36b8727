//! Experiment configuration: a TOML document with documented keys.
//!
//! ```toml
//! experiment = "ns_run"
//! seed = 7
//!
//! [grid]
//! n = 32
//!
//! [solver]
//! T = 0.1
//! ```
//!
//! Unknown keys are rejected. `load_config` fills every default, so the
//! returned value (and its TOML echo) is the complete description of a run.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use wlry_core::dss::FixedPointOptions;
use wlry_core::dynamics::{Advection, SolverConfig};
use wlry_core::fields::{
    gaussian_forcing_profile, gaussian_vortex, make_dss_field, random_forcing, random_solenoidal, taylor_green, DssSpec, Envelope, ForcingSpec, ShellProfile,
};
use wlry_core::ledger::frozen_c_gamma;
use wlry_core::mollifier::MollifierSpec;
use wlry_core::spectral::SpectralOps;
use wlry_core::weights::{weighted_norm_with, WeightTable};
use wlry_core::{GridSpec, VectorField, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Weights,
    Operators,
    NsRun,
    AdRun,
    DssFixpoint,
    Schedule,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Weights => "weights",
            Self::Operators => "operators",
            Self::NsRun => "ns_run",
            Self::AdRun => "ad_run",
            Self::DssFixpoint => "dss_fixpoint",
            Self::Schedule => "schedule",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Mandatory whenever a random field is requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory, relative to the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub grid: GridConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    pub solver: SolverSection,
    #[serde(default)]
    pub data: FieldConfig,
    /// Frozen advecting field of `ad_run`.
    #[serde(default = "FieldConfig::zero")]
    pub advection: FieldConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub dss: DssConfig,
    #[serde(default)]
    pub weights: WeightsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_half_width() -> f64 {
    PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub gamma: f64,
    /// Smoothing of the weight at the origin.
    pub smoothing: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { gamma: 2.0, smoothing: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Mollifier scale `ε√t`; on by default only for fixed-point runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_dependent: Option<bool>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Overrides the frozen constant for `weight.gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_gamma: Option<f64>,
    /// Write a snapshot every this many steps (0: final state only).
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_eps() -> f64 {
    0.1
}

fn default_cfl() -> f64 {
    0.5
}

/// Largest default step.
pub const DEFAULT_DT: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Zero,
    TaylorGreen,
    Gaussian,
    Random,
    Dss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Taylor–Green wavenumber multiple.
    #[serde(default = "one_usize")]
    pub mode: usize,
    /// Gaussian width.
    #[serde(default = "one")]
    pub sigma: f64,
    /// Spectral cutoff of random fields.
    #[serde(default = "two")]
    pub k_c: f64,
    /// Rescale to this `L²_{w_γ}` norm after construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn one_usize() -> usize {
    1
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { kind: FieldKind::TaylorGreen, amplitude: 1.0, mode: 1, sigma: 1.0, k_c: 2.0, normalize: None }
    }
}

impl FieldConfig {
    fn zero() -> Self {
        Self { kind: FieldKind::Zero, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    Zero,
    Random,
    SelfSimilar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingConfig {
    pub kind: ForcingKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "two")]
    pub k_c: f64,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self { kind: ForcingKind::Zero, amplitude: 1.0, k_c: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DssConfig {
    pub lambda: f64,
    /// `random` or `zero` angular profile.
    pub profile: String,
    pub omega: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// 0 disables symmetrisation.
    pub symmetrize_every: usize,
    /// Horizon index of the extension schedule.
    pub n_max: u32,
}

impl Default for DssConfig {
    fn default() -> Self {
        Self { lambda: 2.0, profile: "random".into(), omega: 0.5, max_iter: 40, tol: 1e-8, symmetrize_every: 5, n_max: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub deltas: Vec<f64>,
    pub p: f64,
    /// Probe radii at which the certificate is reported.
    pub radii: Vec<f64>,
    /// Allowed relative change of the certificate between the last two radii.
    pub plateau: f64,
    /// Random fields for the operator identities.
    pub fields: usize,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { deltas: vec![0.5, 1.0, 2.0, 2.9], p: 2.0, radii: vec![100.0, 1000.0], plateau: 0.05, fields: 20 }
    }
}

/// Reads, validates and completes a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.complete()?;
    Ok(cfg)
}

/// TOML text of a configuration.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("configuration serialises")
}

fn key_error(key: &str, reason: &str) -> Error {
    Error::Key { key: key.to_string(), reason: reason.to_string() }
}

impl ExperimentConfig {
    /// Fills derived defaults and checks every invariant.
    pub fn complete(&mut self) -> Result<()> {
        if self.grid.n < 8 || !self.grid.n.is_power_of_two() {
            return Err(key_error("grid.n", "must be a power of two, at least 8"));
        }
        if !(self.grid.half_width > 0.0) || !self.grid.half_width.is_finite() {
            return Err(key_error("grid.half_width", "must be positive"));
        }
        let g = self.weight.gamma;
        if !(g > 0.0) || !g.is_finite() {
            return Err(key_error("weight.gamma", "must be positive"));
        }
        if matches!(self.experiment, ExperimentKind::NsRun | ExperimentKind::AdRun | ExperimentKind::Schedule) && g > 2.0 {
            return Err(key_error("weight.gamma", "γ must be in (0,2] for energy-inequality runs"));
        }
        if self.experiment == ExperimentKind::DssFixpoint && !(g > 4.0 / 3.0 && g <= 2.0) {
            return Err(key_error("weight.gamma", "must lie in (4/3, 2] for fixed-point runs"));
        }
        if !(self.weight.smoothing >= 0.0) {
            return Err(key_error("weight.smoothing", "must be non-negative"));
        }
        let s = &mut self.solver;
        if !(s.t_end > 0.0) || !s.t_end.is_finite() {
            return Err(key_error("solver.T", "must be positive"));
        }
        let fixpoint = self.experiment == ExperimentKind::DssFixpoint;
        match s.time_dependent {
            None => s.time_dependent = Some(fixpoint),
            Some(false) if fixpoint => return Err(key_error("solver.time_dependent", "fixed-point runs need the time-dependent mollifier")),
            _ => {}
        }
        if s.dt.is_none() {
            let steps = (s.t_end / DEFAULT_DT).ceil().max(1.0);
            s.dt = Some(s.t_end / steps);
        }
        if !(s.eps > 0.0) {
            return Err(key_error("solver.eps", "must be positive"));
        }
        if !(s.cfl > 0.0) {
            return Err(key_error("solver.cfl", "must be positive"));
        }
        if let Some(c) = s.c_gamma {
            if !(c > 0.0) {
                return Err(key_error("solver.c_gamma", "must be positive"));
            }
        }
        self.solver_config(ForcingSpec::Zero, Advection::None).map_err(|e| key_error("solver.dt", &e.to_string()))?;
        if !(self.dss.lambda > 1.0) {
            return Err(key_error("dss.lambda", "must exceed 1"));
        }
        if !(self.dss.omega > 0.0 && self.dss.omega <= 1.0) {
            return Err(key_error("dss.omega", "must lie in (0, 1]"));
        }
        if !matches!(self.dss.profile.as_str(), "random" | "zero") {
            return Err(key_error("dss.profile", "must be `random` or `zero`"));
        }
        if self.dss.n_max < 1 {
            return Err(key_error("dss.n_max", "must be at least 1"));
        }
        if self.needs_seed() && self.seed.is_none() {
            return Err(key_error("seed", "required for randomized fields"));
        }
        if self.experiment == ExperimentKind::Weights && (self.weights.radii.len() < 2 || self.weights.deltas.is_empty()) {
            return Err(key_error("weights.radii", "need at least two radii and one delta"));
        }
        if self.experiment == ExperimentKind::DssFixpoint && self.data.kind != FieldKind::Dss && self.data.kind != FieldKind::Zero {
            return Err(key_error("data.kind", "fixed-point runs need `dss` or `zero` data"));
        }
        Ok(())
    }

    fn needs_seed(&self) -> bool {
        let random_field = |f: &FieldConfig| f.kind == FieldKind::Random || (f.kind == FieldKind::Dss && self.dss.profile == "random");
        let uses_data = !matches!(self.experiment, ExperimentKind::Weights);
        self.experiment == ExperimentKind::Operators
            || (uses_data && random_field(&self.data))
            || (self.experiment == ExperimentKind::AdRun && random_field(&self.advection))
            || self.forcing.kind == ForcingKind::Random
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.grid.n, self.grid.half_width).expect("validated grid")
    }

    pub fn weight(&self) -> WeightSpec {
        WeightSpec::new(self.weight.gamma, self.weight.smoothing).expect("validated weight")
    }

    pub fn time_dependent(&self) -> bool {
        self.solver.time_dependent.unwrap_or(false)
    }

    pub fn dt(&self) -> f64 {
        self.solver.dt.expect("completed configuration")
    }

    /// `C_γ` in force: the override or the frozen table.
    pub fn c_gamma(&self) -> Result<f64> {
        self.solver
            .c_gamma
            .or_else(|| frozen_c_gamma(self.weight.gamma))
            .ok_or_else(|| key_error("solver.c_gamma", "no frozen constant for this γ; set it explicitly"))
    }

    pub fn mollifier(&self) -> MollifierSpec {
        MollifierSpec::new(self.solver.eps, self.time_dependent()).expect("validated mollifier")
    }

    pub fn solver_config(&self, forcing: ForcingSpec, advection: Advection) -> wlry_core::Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.dt(), self.solver.t_end, MollifierSpec::new(self.solver.eps, self.time_dependent())?, forcing, advection)?;
        cfg.cfl = self.solver.cfl;
        Ok(cfg)
    }

    pub fn dss_spec(&self) -> Result<DssSpec> {
        let profile = match self.dss.profile.as_str() {
            "zero" => ShellProfile::Zero,
            _ => ShellProfile::Random { seed: self.seed.unwrap_or_default(), amplitude: 1.0 },
        };
        Ok(DssSpec::new(self.dss.lambda, self.weight.gamma.min(2.0), profile)?)
    }

    /// Builds a configured field on the run grid.
    pub fn build_field(&self, ops: &SpectralOps, f: &FieldConfig, salt: u64) -> Result<VectorField> {
        let g = *ops.grid();
        let mut u = match f.kind {
            FieldKind::Zero => VectorField::zeros(g),
            FieldKind::TaylorGreen => taylor_green(&g, f.amplitude, f.mode),
            FieldKind::Gaussian => gaussian_vortex(ops, f.amplitude, f.sigma),
            FieldKind::Random => random_solenoidal(ops, self.seed.unwrap_or_default().wrapping_add(salt), f.k_c).scaled(f.amplitude),
            FieldKind::Dss => make_dss_field(ops, &self.dss_spec()?, &Envelope::for_grid(&g))?.scaled(f.amplitude),
        };
        if let Some(target) = f.normalize {
            let n = weighted_norm_with(&u, 2.0, &WeightTable::new(g, self.weight()))?;
            if n > 0.0 {
                u.scale(target / n);
            }
        }
        Ok(u)
    }

    pub fn build_forcing(&self, ops: &SpectralOps) -> ForcingSpec {
        let g = *ops.grid();
        match self.forcing.kind {
            ForcingKind::Zero => ForcingSpec::Zero,
            ForcingKind::Random => ForcingSpec::Explicit(random_forcing(ops, self.seed.unwrap_or_default().wrapping_add(101), self.forcing.k_c, self.forcing.amplitude)),
            ForcingKind::SelfSimilar => ForcingSpec::SelfSimilar { profile: gaussian_forcing_profile(&g, self.forcing.amplitude) },
        }
    }

    pub fn fixed_point_options(&self) -> Result<FixedPointOptions> {
        let env = Envelope::for_grid(&self.grid());
        Ok(FixedPointOptions {
            lambda: self.dss.lambda,
            gamma: self.weight.gamma,
            omega: self.dss.omega,
            max_iter: self.dss.max_iter,
            tol: self.dss.tol,
            symmetrize_every: (self.dss.symmetrize_every > 0).then_some(self.dss.symmetrize_every),
            region: Some((env.clean_inner(), env.clean_outer())),
            c_gamma: Some(self.c_gamma()?),
        })
    }
}
