use proptest::prelude::*;
use std::f64::consts::PI;
use wlry_core::dynamics::{energy_balance_residual, run, run_ad, run_collect, uniqueness_probe, Advection, SolverConfig, BUMP_SCALES};
use wlry_core::fields::{random_solenoidal, taylor_green, ForcingSpec};
use wlry_core::ledger::{frozen_c_gamma, passive_bound};
use wlry_core::mollifier::MollifierSpec;
use wlry_core::spectral::SpectralOps;
use wlry_core::weights::{weighted_norm, WeightSpec};
use wlry_core::{Error, GridSpec, VectorField};

fn ops(n: usize, l: f64) -> SpectralOps {
    SpectralOps::new(GridSpec::new(n, l).unwrap())
}

fn cfg(dt: f64, t: f64, advection: Advection) -> SolverConfig {
    SolverConfig::new(dt, t, MollifierSpec::fixed(0.1).unwrap(), ForcingSpec::Zero, advection).unwrap()
}

fn vrel(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).unwrap().l2() / b.l2().max(f64::MIN_POSITIVE)
}

#[test]
fn rest_stays_at_rest() {
    let o = ops(16, PI);
    let u0 = VectorField::zeros(*o.grid());
    let traj = run_collect(&o, &u0, &cfg(0.01, 0.1, Advection::SelfMollified)).unwrap();
    assert!(traj.iter().all(|s| s.u.is_zero()));
}

#[test]
fn single_mode_stokes_decay_is_exact() {
    let o = ops(16, PI);
    let u0 = taylor_green(o.grid(), 1.0, 1);
    for traj in [
        run_collect(&o, &u0, &cfg(0.01, 0.2, Advection::None)).unwrap(),
        run_ad(&o, &vec![VectorField::zeros(*o.grid()); 21], &u0, &cfg(0.01, 0.2, Advection::None), false).unwrap(),
    ] {
        for s in &traj {
            let exact = u0.scaled((-3.0 * s.t).exp());
            assert!(vrel(&s.u, &exact) < 1e-8, "t={}", s.t);
        }
    }
}

#[test]
fn navier_stokes_invariants_per_step() {
    let o = ops(32, PI);
    let mut u0 = taylor_green(o.grid(), 1.0, 1);
    u0.axpy(0.3, &random_solenoidal(&o, 5, 3.0)).unwrap();
    let mean0 = u0.mean();
    let mut last = f64::INFINITY;
    run(&o, &u0, &cfg(0.005, 0.2, Advection::SelfMollified), &mut |s| {
        let e = s.u.l2();
        assert!(e * e <= last * last * (1.0 + 1e-10), "energy grew at t={}", s.t);
        last = e;
        let div = o.divergence(s.u);
        let scale = s.grad_u.comps.iter().flat_map(|r| r.iter()).map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max);
        assert!(div.max_abs() <= 1e-8 * scale.max(1.0));
        let m = s.u.mean();
        assert!((0..3).all(|c| (m[c] - mean0[c]).abs() < 1e-12));
        Ok(())
    })
    .unwrap();
}

#[test]
fn taylor_green_converges_under_refinement() {
    let t = 0.5;
    let coarse = ops(32, PI);
    let fine = ops(64, PI);
    let uc = run(&coarse, &taylor_green(coarse.grid(), 1.0, 1), &cfg(0.01, t, Advection::SelfMollified), &mut |_| Ok(())).unwrap();
    let uf = run(&fine, &taylor_green(fine.grid(), 1.0, 1), &cfg(0.005, t, Advection::SelfMollified), &mut |_| Ok(())).unwrap();
    let gc = *coarse.grid();
    let mut down = VectorField::zeros(gc);
    for idx in 0..gc.len() {
        let (i, j, k) = gc.unravel(idx);
        let v = uf.at(fine.grid().index(2 * i, 2 * j, 2 * k));
        for c in 0..3 {
            down.comps[c][idx] = v[c];
        }
    }
    let e = vrel(&uc, &down);
    assert!(e < 1e-3, "{e}");
}

#[test]
fn replaying_the_velocity_reproduces_the_run() {
    let o = ops(16, PI);
    let mut u0 = taylor_green(o.grid(), 1.0, 1);
    u0.axpy(0.5, &random_solenoidal(&o, 8, 2.0)).unwrap();
    let c = cfg(0.01, 0.1, Advection::SelfMollified);
    let ns = run_collect(&o, &u0, &c).unwrap();
    let b: Vec<VectorField> = ns.iter().map(|s| s.u.clone()).collect();
    let ad = run_ad(&o, &b, &u0, &c, true).unwrap();
    for (a, b) in ad.iter().zip(&ns) {
        assert!(vrel(&a.u, &b.u) < 1e-12, "t={}", a.t);
    }
}

#[test]
fn identical_inputs_give_identical_bits() {
    let o = ops(16, PI);
    let u0 = random_solenoidal(&o, 44, 3.0);
    let c = cfg(0.01, 0.1, Advection::SelfMollified);
    let a = run_collect(&o, &u0, &c).unwrap();
    let b = run_collect(&o, &u0, &c).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.u.comps == y.u.comps && x.p.data == y.p.data));
}

#[test]
fn cfl_violation_suggests_a_smaller_step() {
    let o = ops(16, PI);
    let u0 = taylor_green(o.grid(), 50.0, 1);
    match run_collect(&o, &u0, &cfg(0.1, 0.2, Advection::SelfMollified)) {
        Err(Error::Cfl { dt, suggested }) => assert!(suggested < dt),
        other => panic!("expected a CFL error, got {other:?}"),
    }
}

#[test]
fn uniqueness_probe_is_linear_and_bounded() {
    let o = ops(16, PI);
    let g = *o.grid();
    let b = taylor_green(&g, 1.0, 1);
    let u0 = random_solenoidal(&o, 2, 2.0);
    let t = 0.2;
    let c = cfg(0.01, t, Advection::Frozen(b.clone()));
    let w = WeightSpec::plain(2.0).unwrap();
    assert_eq!(uniqueness_probe(&o, &u0, &c, 0.0, &w).unwrap(), 0.0);
    let r3 = uniqueness_probe(&o, &u0, &c, 1e-3, &w).unwrap();
    let r4 = uniqueness_probe(&o, &u0, &c, 1e-4, &w).unwrap();
    assert!(r3 / r4 < 2.0 && r4 / r3 < 2.0, "{r3} {r4}");
    let noise = random_solenoidal(&o, wlry_core::dynamics::PROBE_NOISE_SEED, 2.0);
    let n0 = weighted_norm(&noise, 2.0, &w).unwrap().value;
    let b3 = weighted_norm(&b, 3.0, &WeightSpec::plain(3.0).unwrap()).unwrap().value;
    let b_norm = (t * b3 * b3 * b3).cbrt();
    let (sup, _) = passive_bound(n0, 0.0, b_norm, t, frozen_c_gamma(2.0).unwrap());
    assert!(r4 <= sup, "{r4} > {sup}");
}

#[test]
fn defect_measure_vanishes_for_smooth_runs() {
    let o = ops(32, PI);
    let g = *o.grid();
    let zero = energy_balance_residual(&o, &VectorField::zeros(g), &cfg(0.01, 0.1, Advection::SelfMollified), &BUMP_SCALES).unwrap();
    assert!(!zero.is_empty() && zero.iter().all(|p| p.value == 0.0));
    let u0 = taylor_green(&g, 1.0, 1);
    let dt = 0.005;
    let pairings = energy_balance_residual(&o, &u0, &cfg(dt, 0.1, Advection::SelfMollified), &BUMP_SCALES).unwrap();
    let h = g.spacing();
    let e0 = u0.l2() * u0.l2();
    let tol = 10.0 * (dt + h * h) * e0;
    let worst = pairings.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
    assert!(worst <= tol, "{worst} > {tol}");
}

#[test]
fn too_few_samples_for_the_defect() {
    let o = ops(16, PI);
    let u0 = taylor_green(o.grid(), 1.0, 1);
    assert!(energy_balance_residual(&o, &u0, &cfg(0.05, 0.05, Advection::None), &BUMP_SCALES).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn random_runs_stay_solenoidal_and_dissipative(seed in 0u64..10_000, amp in 0.1f64..3.0) {
        let o = ops(16, PI);
        let u0 = random_solenoidal(&o, seed, 2.0).scaled(amp);
        let mut last = f64::INFINITY;
        let mut ok = true;
        run(&o, &u0, &cfg(0.01, 0.1, Advection::SelfMollified), &mut |s| {
            let e = s.u.l2();
            ok &= e <= last * (1.0 + 1e-10) && o.divergence(s.u).max_abs() < 1e-8 * amp.max(1.0);
            last = e;
            Ok(())
        })
        .unwrap();
        prop_assert!(ok);
    }
}
