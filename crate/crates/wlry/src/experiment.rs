//! Experiment orchestration: builds the run from a configuration, executes
//! it and writes the CSV tables, the summary and optional snapshots.

use crate::config::{ExperimentConfig, ExperimentKind, FieldKind};
use crate::csv::{ledger_table, Table, Value};
use crate::error::{io, Error, Result};
use crate::snapshot::Snapshot;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use wlry_core::dss::{equation_residual, fixed_point_iterate, xnorm_trajectory};
use wlry_core::dynamics::{run, Advection, SolverConfig};
use wlry_core::fields::{random_scalar, random_solenoidal};
use wlry_core::ledger::{active_bound, global_extension_schedule, passive_bound, LedgerAccumulator, LedgerSummary};
use wlry_core::region::ball_fraction;
use wlry_core::spectral::SpectralOps;
use wlry_core::weights::{muckenhoupt_certificate, Probe, WeightTable};
use wlry_core::{ScalarField, VectorField, WeightSpec};

/// Environment variable overriding the output root.
pub const OUTPUT_ROOT_ENV: &str = "WLRY_OUTPUT_ROOT";

/// Named pass/fail outcome with the number it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value <= limit, value, limit }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value >= limit, value, limit }
    }

    fn flag(name: &str, passed: bool) -> Self {
        Self { name: name.into(), passed, value: if passed { 1.0 } else { 0.0 }, limit: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: bool,
    pub notes: Vec<String>,
    pub measured: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub config: ExperimentConfig,
}

impl Summary {
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Result of one experiment.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Directory an experiment writes to: `<root>/<output>`, the root taken
/// from [`OUTPUT_ROOT_ENV`] or the current directory.
pub fn output_dir(cfg: &ExperimentConfig, config_stem: &str) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    root.join(cfg.output.clone().unwrap_or_else(|| format!("out/{config_stem}")))
}

struct Context {
    dir: PathBuf,
    files: Vec<PathBuf>,
    measured: BTreeMap<String, f64>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Context {
    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.dir.join(name);
        t.write(&p)?;
        self.files.push(p);
        Ok(())
    }

    fn snapshot(&mut self, name: &str, s: &Snapshot) -> Result<()> {
        let p = self.dir.join(name);
        s.write(&p)?;
        self.files.push(p);
        Ok(())
    }

    fn measure(&mut self, name: &str, v: f64) {
        self.measured.insert(name.into(), v);
    }
}

/// Runs `cfg`, writing into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut cx = Context { dir: dir.to_path_buf(), files: Vec::new(), measured: BTreeMap::new(), checks: Vec::new(), notes: Vec::new() };
    match cfg.experiment {
        ExperimentKind::Weights => weights(cfg, &mut cx)?,
        ExperimentKind::Operators => operators(cfg, &mut cx)?,
        ExperimentKind::NsRun | ExperimentKind::AdRun => flow(cfg, &mut cx)?,
        ExperimentKind::DssFixpoint => fixpoint(cfg, &mut cx)?,
        ExperimentKind::Schedule => schedule(cfg, &mut cx)?,
    }
    let summary = Summary {
        experiment: cfg.experiment.name().into(),
        passed: cx.checks.iter().all(|c| c.passed),
        notes: cx.notes,
        measured: cx.measured,
        checks: cx.checks,
        config: cfg.clone(),
    };
    let text = toml::to_string(&summary).map_err(|e| Error::Config(e.to_string()))?;
    let p = dir.join("summary.toml");
    std::fs::write(&p, text).map_err(|e| io(&p, e))?;
    cx.files.push(p);
    Ok(RunReport { summary, out_dir: dir.to_path_buf(), files: cx.files })
}

/// Exact `‖1_{B(0,1)}‖²` in `L²_{w₂}`.
pub fn unit_ball_golden() -> f64 {
    4.0 * PI * (1.5 - 2.0 * std::f64::consts::LN_2)
}

/// Probe balls centred at the origin with radii `10^{k/4}` up to `r`.
pub fn centred_probes(r: f64) -> Vec<Probe> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let radius = 10f64.powf(k as f64 / 4.0);
        if radius > r * (1.0 + 1e-12) {
            break;
        }
        out.push(Probe { center: [0.0; 3], radius });
        k += 1;
    }
    out
}

fn weights(cfg: &ExperimentConfig, cx: &mut Context) -> Result<()> {
    let s = &cfg.weights;
    let mut t = Table::new(&["delta", "radius", "certificate"]);
    for &delta in &s.deltas {
        let w = WeightSpec::plain(delta)?;
        let mut certs = Vec::new();
        for &r in &s.radii {
            let c = muckenhoupt_certificate(&w, s.p, &centred_probes(r))?;
            t.push(vec![delta.into(), r.into(), c.into()]);
            certs.push(c);
        }
        let n = certs.len();
        let change = (certs[n - 1] - certs[n - 2]).abs() / certs[n - 2];
        cx.measure(&format!("certificate_change_delta_{delta}"), change);
        // `(1+|x|)^-δ` lies in A_p exactly when δ < 3(p-1).
        if delta < 3.0 * (s.p - 1.0) {
            cx.checks.push(Check::flag(&format!("finite_delta_{delta}"), certs.iter().all(|c| c.is_finite())));
            cx.checks.push(Check::at_most(&format!("plateau_delta_{delta}"), change, s.plateau));
        } else {
            let growing = certs.windows(2).all(|p| p[1] > p[0]);
            cx.checks.push(Check::flag(&format!("growth_delta_{delta}"), growing));
        }
    }
    cx.table("weights.csv", &t)?;

    let g = cfg.grid();
    let frac = ball_fraction(&g, [0.0; 3], 1.0);
    let table = WeightTable::new(g, WeightSpec::plain(2.0)?);
    let value: f64 = frac.iter().zip(&table.values).map(|(f, w)| f * w).sum::<f64>() * g.cell_volume();
    let rel = (value - unit_ball_golden()).abs() / unit_ball_golden();
    cx.measure("unit_ball_norm_sq", value);
    cx.measure("unit_ball_rel_error", rel);
    let tol = if g.n() >= 128 { 0.005 } else { 0.02 };
    cx.checks.push(Check::at_most("unit_ball_golden", rel, tol));
    Ok(())
}

fn rel_l2(a: &ScalarField, b: &ScalarField) -> f64 {
    let num: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.data.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn vec_rel(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).map(|d| d.l2() / b.l2().max(f64::MIN_POSITIVE)).unwrap_or(f64::INFINITY)
}

fn operators(cfg: &ExperimentConfig, cx: &mut Context) -> Result<()> {
    let g = cfg.grid();
    let ops = SpectralOps::new(g);
    let seed = cfg.seed.unwrap_or_default();
    let mut t = Table::new(&["field", "riesz_sum", "leray_idempotent", "leray_gradient", "divergence"]);
    let mut worst = [0.0f64; 4];
    for i in 0..cfg.weights.fields {
        let s = seed.wrapping_add(i as u64);
        let f = random_scalar(&ops, s, 4.0);
        let mut sum = ScalarField::zeros(g);
        for j in 0..3 {
            let r = ops.riesz_transform(&ops.riesz_transform(&f, j), j);
            sum.axpy(1.0, &r)?;
        }
        let mut centred = f.clone();
        let m = f.mean();
        centred.data.iter_mut().for_each(|v| *v = -(*v - m));
        let e1 = rel_l2(&sum, &centred);

        let v = random_solenoidal(&ops, s, 4.0);
        let mut raw = v.clone();
        let grad_q = ops.gradient(&f);
        raw.axpy(1.0, &grad_q)?;
        let p1 = ops.leray_project(&raw);
        let e2 = vec_rel(&ops.leray_project(&p1), &p1);
        let e3 = ops.leray_project(&grad_q).l2() / grad_q.l2();
        let div = ops.divergence(&p1);
        let grad_scale: f64 = (0..3).map(|c| ops.gradient(&p1.component(c)).l2().powi(2)).sum::<f64>().sqrt();
        let e4 = div.l2() / grad_scale;
        for (w, e) in worst.iter_mut().zip([e1, e2, e3, e4]) {
            *w = w.max(e);
        }
        t.push(vec![i.into(), e1.into(), e2.into(), e3.into(), e4.into()]);
    }
    cx.table("operators.csv", &t)?;
    for (name, w) in ["riesz_sum", "leray_idempotent", "leray_gradient", "divergence"].iter().zip(worst) {
        cx.measure(name, w);
        cx.checks.push(Check::at_most(name, w, 1e-10));
    }
    Ok(())
}

/// Step count for a horizon and a step bound.
fn fitted_dt(t_end: f64, bound: f64) -> f64 {
    t_end / (t_end / bound).ceil()
}

/// Retries `f` with the suggested step after a CFL rejection.
fn with_cfl_retry<T>(cfg: &mut SolverConfig, notes: &mut Vec<String>, mut f: impl FnMut(&SolverConfig) -> wlry_core::Result<T>) -> Result<T> {
    for _ in 0..8 {
        match f(cfg) {
            Err(wlry_core::Error::Cfl { dt, suggested }) => {
                let next = fitted_dt(cfg.t_end, suggested);
                notes.push(format!("CFL rejected dt = {dt}; retried with dt = {next}"));
                cfg.dt = next;
            }
            other => return Ok(other?),
        }
    }
    Err(Error::Core(wlry_core::Error::Unsupported("CFL retries exhausted")))
}

struct FlowOutcome {
    ledger: LedgerSummary,
    max_div: f64,
    energy_monotone: bool,
    snapshots: Vec<(usize, f64, VectorField)>,
}

fn flow(cfg: &ExperimentConfig, cx: &mut Context) -> Result<()> {
    let g = cfg.grid();
    let ops = SpectralOps::new(g);
    let w = cfg.weight();
    let c = cfg.c_gamma()?;
    let u0 = cfg.build_field(&ops, &cfg.data, 0)?;
    let forcing = cfg.build_forcing(&ops);
    let unforced = forcing.is_zero();
    let advection = match cfg.experiment {
        ExperimentKind::NsRun => Advection::SelfMollified,
        _ if cfg.advection.kind == FieldKind::Zero => Advection::None,
        _ => Advection::Frozen(cfg.build_field(&ops, &cfg.advection, 7)?),
    };
    let mut scfg = cfg.solver_config(forcing, advection)?;
    let every = cfg.solver.snapshot_every;
    let out = with_cfl_retry(&mut scfg, &mut cx.notes, |sc| {
        let mut acc = LedgerAccumulator::new(g, w, c)?;
        let mut max_div = 0.0f64;
        let mut prev = f64::INFINITY;
        let mut monotone = true;
        let mut snaps = Vec::new();
        let steps = sc.steps()?;
        run(&ops, &u0, sc, &mut |s| {
            acc.observe(s)?;
            let div = ops.divergence(s.u).max_abs();
            let scale = (0..3).map(|i| s.grad_u.comps[i][i].iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max);
            if scale > 0.0 {
                max_div = max_div.max(div / scale);
            }
            let e = s.u.l2();
            if e > prev * (1.0 + 1e-10) {
                monotone = false;
            }
            prev = e;
            if (every > 0 && s.step % every == 0) || s.step == steps {
                snaps.push((s.step, s.t, s.u.clone()));
            }
            Ok(())
        })?;
        Ok(FlowOutcome { ledger: acc.finish()?, max_div, energy_monotone: monotone, snapshots: snaps })
    })?;
    let l = &out.ledger;
    cx.table("ledger.csv", &ledger_table(&l.entries))?;
    for (step, t, u) in &out.snapshots {
        cx.snapshot(&format!("u_{step:06}.wlry"), &Snapshot::from_vector(u, *t))?;
    }
    let (wa, wb) = l.worst_slacks();
    cx.measure("dt", scfg.dt);
    cx.measure("c_gamma", c);
    cx.measure("tol_disc", l.entries[0].tol_disc);
    cx.measure("worst_slack_A_over_tol", wa);
    cx.measure("worst_slack_B_over_tol", wb);
    cx.measure("u0_norm", l.u0_norm);
    cx.measure("sup_norm", l.sup_norm);
    cx.measure("grad_norm", l.grad_norm);
    cx.measure("forcing_norm", l.forcing_norm);
    cx.measure("b_norm", l.b_norm);
    cx.measure("max_divergence", out.max_div);
    cx.measure("min_c_second_control", l.min_c_second_control());
    cx.checks.push(Check::at_least("control_A", wa, -1.0));
    cx.checks.push(Check::at_least("control_B", wb, -1.0));
    cx.checks.push(Check::at_most("divergence_free", out.max_div, 1e-8));
    if unforced && cfg.experiment == ExperimentKind::NsRun {
        cx.checks.push(Check::flag("energy_non_increasing", out.energy_monotone));
    }
    if cfg.experiment == ExperimentKind::NsRun {
        let f_cum = l.forcing_cum.last().copied().unwrap_or(0.0);
        let b = active_bound(l.u0_norm, f_cum, l.c0, c);
        cx.measure("c0", l.c0);
        cx.measure("t0_max", b.t0_max);
        cx.measure("active_sup_bound", b.sup_bound);
        cx.measure("min_c_active", l.min_c_active());
        cx.checks.push(Check::flag("active_bound", l.active_holds(c)));
    } else {
        let (sup, _) = passive_bound(l.u0_norm, l.forcing_norm, l.b_norm, l.t_end, c);
        cx.measure("passive_sup_bound", sup);
        cx.measure("min_c_passive", l.min_c_passive());
        cx.checks.push(Check::flag("passive_bound", l.passive_holds(c)));
    }
    Ok(())
}

fn fixpoint(cfg: &ExperimentConfig, cx: &mut Context) -> Result<()> {
    let g = cfg.grid();
    let ops = SpectralOps::new(g);
    let u0 = cfg.build_field(&ops, &cfg.data, 0)?;
    let forcing = cfg.build_forcing(&ops);
    let opts = cfg.fixed_point_options()?;
    let mut scfg = cfg.solver_config(forcing, Advection::None)?;
    let (traj, trace) = with_cfl_retry(&mut scfg, &mut cx.notes, |sc| fixed_point_iterate(&ops, &u0, sc, &opts))?;
    let mut t = Table::new(&["k", "residual", "residual_full", "x_norm", "symmetrized"]);
    for it in &trace.iterates {
        t.push(vec![it.k.into(), it.residual.into(), it.residual_full.into(), it.x_norm.into(), it.symmetrized.into()]);
    }
    cx.table("trace.csv", &t)?;
    let last = trace.iterates.last().expect("at least one iterate");
    cx.measure("dt", scfg.dt);
    cx.measure("iterations", trace.iterates.len() as f64);
    cx.measure("final_residual", last.residual);
    cx.checks.push(Check::flag("converged", trace.converged));
    let monotone = trace.iterates.windows(2).all(|p| p[1].residual <= p[0].residual || p[1].symmetrized);
    cx.checks.push(Check::flag("residual_monotone", monotone));
    if trace.converged {
        let eq = equation_residual(&ops, &traj, &scfg, opts.lambda)?;
        cx.measure("equation_residual", eq);
        cx.checks.push(Check::at_most("equation_residual", eq, 10.0 * opts.tol));
    }
    let x = xnorm_trajectory(&traj, scfg.dt, opts.lambda, opts.gamma)?;
    cx.measure("xnorm_full", x.full);
    cx.measure("xnorm_cell", x.cell);
    if let Some(r) = trace.apriori_radius {
        cx.measure("apriori_radius", r);
        cx.checks.push(Check::flag("apriori_ball", trace.inside_ball().unwrap_or(false)));
    }
    let end = traj.last().expect("non-empty trajectory");
    cx.snapshot("u_final.wlry", &Snapshot::from_vector(end, scfg.t_end))?;
    Ok(())
}

fn schedule(cfg: &ExperimentConfig, cx: &mut Context) -> Result<()> {
    if cfg.forcing.kind != crate::config::ForcingKind::Zero {
        return Err(Error::Key { key: "forcing.kind".into(), reason: "the extension schedule is computed for unforced data".into() });
    }
    let g = cfg.grid();
    let ops = SpectralOps::new(g);
    let u0 = cfg.build_field(&ops, &cfg.data, 0)?;
    let s = global_extension_schedule(&u0, &cfg.weight(), cfg.dss.lambda, cfg.c_gamma()?, cfg.dss.n_max)?;
    let mut t = Table::new(&["n", "norm_rescaled", "norm_change_of_variables", "rel_diff", "T_n", "stretched"]);
    let mut worst = 0.0f64;
    for r in &s.rows {
        let rel = (r.norm_rescaled - r.norm_change_of_variables).abs() / r.norm_change_of_variables.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        t.push(vec![r.n.into(), r.norm_rescaled.into(), r.norm_change_of_variables.into(), Value::Real(rel), r.t_n.into(), r.stretched.into()]);
    }
    cx.table("schedule.csv", &t)?;
    cx.measure("worst_norm_rel_diff", worst);
    cx.checks.push(Check::at_most("norm_agreement", worst, 0.01));
    cx.checks.push(Check::flag("stretched_increasing", s.increasing));
    Ok(())
}
