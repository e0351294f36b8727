use proptest::prelude::*;
use wlry_core::dss::{
    apply_l_eps, apriori_ball, equation_residual, fixed_point_iterate, shell_partial_sums, xnorm_ratio_bounds, xnorm_sampled, xnorm_trajectory, FixedPointOptions, TimeRule,
};
use wlry_core::dynamics::{run_collect, Advection, SolverConfig};
use wlry_core::fields::{make_dss_field, random_forcing, random_scalar, random_solenoidal, DssSpec, Envelope, ForcingSpec, ShellProfile};
use wlry_core::ledger::{frozen_c_gamma, passive_bound};
use wlry_core::mollifier::MollifierSpec;
use wlry_core::spectral::SpectralOps;
use wlry_core::weights::{weighted_norm, WeightSpec};
use wlry_core::{GridSpec, VectorField};

fn ops(n: usize, l: f64) -> SpectralOps {
    SpectralOps::new(GridSpec::new(n, l).unwrap())
}

fn cfg(dt: f64, t: f64, forcing: ForcingSpec) -> SolverConfig {
    SolverConfig::new(dt, t, MollifierSpec::new(0.1, true).unwrap(), forcing, Advection::None).unwrap()
}

fn max_rel(a: &[VectorField], b: &[VectorField]) -> f64 {
    let scale = b.iter().map(|v| v.l2()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| x.sub(y).unwrap().l2() / scale).fold(0.0, f64::max)
}

fn small_dss(o: &SpectralOps, target: f64) -> VectorField {
    let spec = DssSpec::new(2.0, 2.0, ShellProfile::Random { seed: 3, amplitude: 1.0 }).unwrap();
    let u = make_dss_field(o, &spec, &Envelope::for_grid(o.grid())).unwrap();
    let n = weighted_norm(&u, 2.0, &WeightSpec::plain(2.0).unwrap()).unwrap().value;
    u.scaled(target / n)
}

#[test]
fn zero_trajectory_has_zero_norms() {
    let g = GridSpec::new(16, 4.0).unwrap();
    let r = xnorm_trajectory(&vec![VectorField::zeros(g); 5], 0.1, 2.0, 2.0).unwrap();
    assert_eq!((r.full, r.cell, r.ratio), (0.0, 0.0, None));
}

#[test]
fn self_similar_norm_is_rebuilt_from_the_cell() {
    let g = GridSpec::new(64, 4.0).unwrap();
    let phi = |y: [f64; 3]| {
        let e = (-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) / 4.0).exp();
        [-y[1] * e, y[0] * e, 0.3 * y[2] * e]
    };
    for gamma in [1.5, 2.0] {
        let mut sample = |t: f64| {
            let s = t.sqrt();
            Ok(VectorField::from_fn(g, |x| phi(x.map(|v| v / s)).map(|v| v / s)))
        };
        let r = xnorm_sampled(&g, &mut sample, 2.0, gamma, 1.0, TimeRule::default()).unwrap();
        let rec = r.reconstructed.unwrap();
        assert!((rec - r.full).abs() / r.full < 0.03, "γ={gamma}: {rec} vs {}", r.full);
        let (lo, hi) = xnorm_ratio_bounds(2.0, gamma, 40);
        let ratio = r.ratio.unwrap();
        assert!(lo <= ratio && ratio <= hi, "{lo} <= {ratio} <= {hi}");
        assert!(r.equivalent);
    }
}

#[test]
fn low_decay_exponent_loses_equivalence() {
    let g = GridSpec::new(8, 4.0).unwrap();
    let r = xnorm_trajectory(&vec![VectorField::zeros(g); 3], 0.1, 2.0, 1.3).unwrap();
    assert!(!r.equivalent);
    let s = shell_partial_sums(2.0, 1.3, 60);
    assert!(s[60] > 2.0 * s[30] && s[30] > 2.0 * s[10]);
}

#[test]
fn linear_map_is_affine_in_data_and_forcing() {
    let o = ops(16, 4.0);
    let g = *o.grid();
    let (dt, t) = (0.01, 0.1);
    let b: Vec<VectorField> = (0..=10).map(|i| random_solenoidal(&o, 100 + i, 2.0)).collect();
    let u1 = random_solenoidal(&o, 1, 2.0);
    let u2 = random_solenoidal(&o, 2, 2.0).scaled(0.5);
    let f1 = random_forcing(&o, 10, 2.0, 0.3);
    let f2 = random_forcing(&o, 20, 2.0, 0.2);
    let mut f12 = f1.clone();
    for i in 0..3 {
        for j in 0..3 {
            for (a, c) in f12.comps[i][j].iter_mut().zip(&f2.comps[i][j]) {
                *a += c;
            }
        }
    }
    let mut u12 = u1.clone();
    u12.axpy(1.0, &u2).unwrap();
    let l = |u: &VectorField, f: ForcingSpec| apply_l_eps(&o, &b, u, &cfg(dt, t, f)).unwrap();
    let a = l(&u1, ForcingSpec::Explicit(f1));
    let c = l(&u2, ForcingSpec::Explicit(f2));
    let z = l(&VectorField::zeros(g), ForcingSpec::Zero);
    let both = l(&u12, ForcingSpec::Explicit(f12));
    let combo: Vec<VectorField> = (0..a.len())
        .map(|n| {
            let mut v = a[n].clone();
            v.axpy(1.0, &c[n]).unwrap();
            v.axpy(-1.0, &z[n]).unwrap();
            v
        })
        .collect();
    assert!(max_rel(&both, &combo) < 1e-9);
}

#[test]
fn gradients_in_the_advecting_field_are_projected_away() {
    let o = ops(16, 4.0);
    let b: Vec<VectorField> = (0..=10).map(|i| random_solenoidal(&o, 200 + i, 2.0)).collect();
    let shifted: Vec<VectorField> = b
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut w = v.clone();
            w.axpy(1.0, &o.gradient(&random_scalar(&o, 300 + i as u64, 2.0))).unwrap();
            w
        })
        .collect();
    let u0 = random_solenoidal(&o, 5, 2.0);
    let c = cfg(0.01, 0.1, ForcingSpec::Zero);
    let a = apply_l_eps(&o, &b, &u0, &c).unwrap();
    let s = apply_l_eps(&o, &shifted, &u0, &c).unwrap();
    assert!(max_rel(&s, &a) < 1e-10);
}

#[test]
fn linear_map_without_advection_is_the_heat_flow() {
    let o = ops(16, 4.0);
    let g = *o.grid();
    let u0 = random_solenoidal(&o, 6, 2.0);
    let c = cfg(0.01, 0.1, ForcingSpec::Zero);
    let a = apply_l_eps(&o, &vec![VectorField::zeros(g); 11], &u0, &c).unwrap();
    let heat: Vec<VectorField> = run_collect(&o, &u0, &c).unwrap().into_iter().map(|s| s.u).collect();
    assert!(max_rel(&a, &heat) < 1e-12);
}

#[test]
fn linear_output_obeys_the_passive_bound() {
    let o = ops(32, 8.0);
    let u0 = small_dss(&o, 1.0);
    let (dt, t) = (0.01, 0.2);
    let c = cfg(dt, t, ForcingSpec::Zero);
    let b: Vec<VectorField> = run_collect(&o, &u0, &c).unwrap().into_iter().map(|s| s.u).collect();
    let out = apply_l_eps(&o, &b, &u0, &c).unwrap();
    let w = WeightSpec::plain(2.0).unwrap();
    let x = xnorm_trajectory(&b, dt, 2.0, 2.0).unwrap();
    let u0n = weighted_norm(&u0, 2.0, &w).unwrap().value;
    let (sup, _) = passive_bound(u0n, 0.0, x.full, t, frozen_c_gamma(2.0).unwrap());
    let worst = out.iter().map(|v| weighted_norm(v, 2.0, &w).unwrap().value).fold(0.0, f64::max);
    assert!(worst <= sup, "{worst} > {sup}");
}

#[test]
fn zero_data_is_a_fixed_point_at_once() {
    let o = ops(16, 8.0);
    let g = *o.grid();
    let (traj, trace) = fixed_point_iterate(&o, &VectorField::zeros(g), &cfg(0.02, 0.16, ForcingSpec::Zero), &FixedPointOptions::default()).unwrap();
    assert!(trace.converged);
    assert_eq!(trace.iterates.len(), 1);
    assert!(traj.iter().all(|v| v.is_zero()));
}

#[test]
fn relaxation_outside_the_unit_interval_is_rejected() {
    let o = ops(8, 8.0);
    let g = *o.grid();
    for omega in [0.0, 1.5] {
        let opts = FixedPointOptions { omega, ..FixedPointOptions::default() };
        assert!(fixed_point_iterate(&o, &VectorField::zeros(g), &cfg(0.02, 0.16, ForcingSpec::Zero), &opts).is_err());
    }
}

#[test]
fn small_data_converges_and_solves_the_equation() {
    let o = ops(32, 8.0);
    let u0 = small_dss(&o, 0.01);
    let c = cfg(0.01, 0.4, ForcingSpec::Zero);
    let opts = FixedPointOptions { omega: 1.0, max_iter: 20, c_gamma: frozen_c_gamma(2.0), ..FixedPointOptions::default() };
    let (traj, trace) = fixed_point_iterate(&o, &u0, &c, &opts).unwrap();
    assert!(trace.converged, "{:?}", trace.iterates.last());
    assert!(trace.iterates.len() <= 20);
    assert!(equation_residual(&o, &traj, &c, 2.0).unwrap() < 10.0 * opts.tol);
    assert_eq!(trace.inside_ball(), Some(true));
}

#[test]
fn halved_relaxation_reaches_the_same_fixed_point() {
    let o = ops(32, 8.0);
    let u0 = small_dss(&o, 0.05);
    let (dt, t) = (0.01, 0.4);
    let c = cfg(dt, t, ForcingSpec::Zero);
    let base = FixedPointOptions { symmetrize_every: None, ..FixedPointOptions::default() };
    let (a, ta) = fixed_point_iterate(&o, &u0, &c, &FixedPointOptions { omega: 0.5, ..base.clone() }).unwrap();
    let (b, tb) = fixed_point_iterate(&o, &u0, &c, &FixedPointOptions { omega: 0.25, max_iter: 2 * base.max_iter, ..base.clone() }).unwrap();
    assert!(ta.converged && tb.converged);
    let diff: Vec<VectorField> = a.iter().zip(&b).map(|(x, y)| x.sub(y).unwrap()).collect();
    let d = xnorm_trajectory(&diff, dt, 2.0, 2.0).unwrap().cell;
    assert!(d < 5.0 * base.tol, "{d}");
}

#[test]
fn iteration_commutes_with_the_parabolic_rescaling() {
    let lambda = 2.0;
    let o = ops(16, 8.0);
    let g = *o.grid();
    let small = SpectralOps::new(g.scaled(1.0 / lambda).unwrap());
    let u0 = small_dss(&o, 0.5);
    let u0s = VectorField { grid: *small.grid(), comps: u0.comps.clone() }.scaled(lambda);
    let opts = FixedPointOptions { omega: 1.0, max_iter: 3, tol: 0.0, symmetrize_every: None, ..FixedPointOptions::default() };
    let (a, _) = fixed_point_iterate(&o, &u0, &cfg(0.02, 0.16, ForcingSpec::Zero), &opts).unwrap();
    let (b, _) = fixed_point_iterate(&small, &u0s, &cfg(0.02 / 4.0, 0.16 / 4.0, ForcingSpec::Zero), &opts).unwrap();
    let back: Vec<VectorField> = b.iter().map(|v| VectorField { grid: g, comps: v.comps.clone() }.scaled(1.0 / lambda)).collect();
    assert!(max_rel(&back, &a) < 1e-10);
}

#[test]
fn apriori_radius_for_unit_constant() {
    assert!((apriori_ball(0.0, 0.0, 1.0, 2.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn apriori_radius_is_monotone(u in 0.0f64..5.0, f in 0.0f64..5.0, du in 0.0f64..2.0, df in 0.0f64..2.0, t in 0.01f64..2.0, c in 0.1f64..4.0) {
        let r = apriori_ball(u, f, t, 2.0, c).unwrap();
        prop_assert!(apriori_ball(u + du, f, t, 2.0, c).unwrap() >= r * (1.0 - 1e-12));
        prop_assert!(apriori_ball(u, f + df, t, 2.0, c).unwrap() >= r * (1.0 - 1e-12));
    }
}
