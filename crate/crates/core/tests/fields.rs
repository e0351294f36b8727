use proptest::prelude::*;
use std::f64::consts::PI;
use wlry_core::fields::{
    clean_shells, dss_drift, dss_norm_equivalence, dss_norm_equivalence_at, dss_samples, drift_region, gaussian_vortex, inverse_radius_integral, make_dss_field,
    make_self_similar_field, make_ss_forcing, self_similar_samples, shell_integral, shell_series, ss_forcing_constant, ss_forcing_spacetime_norm, truncate_data, DssSpec,
    Envelope, ShellProfile,
};
use wlry_core::spectral::SpectralOps;
use wlry_core::weights::{weighted_norm, WeightSpec};
use wlry_core::{GridSpec, TensorField, VectorField};

fn ops(n: usize, l: f64) -> SpectralOps {
    SpectralOps::new(GridSpec::new(n, l).unwrap())
}

fn vrel(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).unwrap().l2() / b.l2().max(f64::MIN_POSITIVE)
}

fn swirl(s: [f64; 3]) -> [f64; 3] {
    [-s[1], s[0], 0.0]
}

fn random_dss(lambda: f64) -> DssSpec {
    DssSpec::new(lambda, 2.0, ShellProfile::Random { seed: 7, amplitude: 1.0 }).unwrap()
}

fn div_ratio(o: &SpectralOps, u: &VectorField) -> f64 {
    o.divergence(u).l2() / u.l2()
}

#[test]
fn truncation_keeps_compactly_supported_data() {
    let o = ops(64, 8.0);
    let u = gaussian_vortex(&o, 1.0, 0.8);
    let t = truncate_data(&o, &u, 3.5).unwrap();
    assert!(vrel(&t, &u) < 1e-9);
    assert!(div_ratio(&o, &t) < 1e-9);
}

#[test]
fn truncation_error_decreases_along_dyadic_radii() {
    let o = ops(64, 16.0);
    let u = make_self_similar_field(&o, swirl, &Envelope::for_grid(o.grid()));
    let w = WeightSpec::plain(2.0).unwrap();
    let norm = weighted_norm(&u, 2.0, &w).unwrap().value;
    let mut errs = Vec::new();
    for r in [2.0, 4.0, 8.0, 16.0] {
        let t = truncate_data(&o, &u, r).unwrap();
        errs.push(weighted_norm(&t.sub(&u).unwrap(), 2.0, &w).unwrap().value);
        let ratio = weighted_norm(&t, 2.0, &w).unwrap().value / norm;
        assert!(ratio <= 1.0 + 1e-6, "R={r}: {ratio}");
    }
    assert!(errs.windows(2).all(|p| p[1] < p[0]), "{errs:?}");
}

#[test]
fn dss_field_is_invariant_under_one_dilation() {
    let o = ops(64, 8.0);
    let env = Envelope::for_grid(o.grid());
    let spec = random_dss(2.0);
    let u = make_dss_field(&o, &spec, &env).unwrap();
    let (lo, hi) = drift_region(&env, 2.0);
    let d = dss_drift(&u, 2.0, lo, hi);
    assert!(d < 0.02, "{d}");
    assert!(div_ratio(&o, &u) < 1e-8);
    let raw = dss_samples(o.grid(), &spec, &env).unwrap();
    assert!((dss_drift(&raw, 2.0, lo, hi) - d).abs() < 0.02);
}

#[test]
fn zero_profiles_give_zero_fields() {
    let o = ops(16, 8.0);
    let env = Envelope::for_grid(o.grid());
    let spec = DssSpec::new(2.0, 2.0, ShellProfile::Zero).unwrap();
    assert!(make_dss_field(&o, &spec, &env).unwrap().is_zero());
    assert!(make_self_similar_field(&o, |_| [0.0; 3], &env).is_zero());
    let f0 = TensorField::zeros(*o.grid());
    assert!(make_ss_forcing(&f0, 0.3, o.grid()).unwrap().is_zero());
    assert!(DssSpec::new(1.0, 2.0, ShellProfile::Zero).is_err());
}

#[test]
fn self_similar_field_is_dss_for_every_factor() {
    let o = ops(64, 8.0);
    let env = Envelope::for_grid(o.grid());
    let u = make_self_similar_field(&o, swirl, &env);
    for lambda in [1.5, 2.0] {
        let (lo, hi) = drift_region(&env, lambda);
        let d = dss_drift(&u, lambda, lo, hi);
        assert!(d < 0.02, "λ={lambda}: {d}");
    }
}

#[test]
fn self_similar_shell_energy() {
    // ∫_{S²} |e₃ × σ|² dσ = 8π/3.
    let g = GridSpec::new(128, 4.0).unwrap();
    let env = Envelope::for_grid(&g);
    let u = self_similar_samples(&g, swirl, &env);
    let lambda = 2.0;
    let got = shell_integral(&u, 1.0, lambda);
    let exact = (lambda - 1.0) * 8.0 * PI / 3.0;
    assert!((got - exact).abs() / exact < 0.01, "{got} vs {exact}");
}

#[test]
fn tangential_field_is_already_solenoidal() {
    let o = ops(128, 8.0);
    let g = *o.grid();
    // The default ramps are too sharp for spectral differentiation at this
    // tolerance; 24-cell ramps keep the sampled field resolved.
    let raw = self_similar_samples(&g, swirl, &Envelope::wide(&g, 24.0));
    let projected = o.leray_project(&raw);
    assert!(vrel(&projected, &raw) < 1e-6);
}

#[test]
fn forcing_at_unit_time_is_the_profile() {
    let g = GridSpec::new(16, 2.0).unwrap();
    let f0 = TensorField::from_fn(g, |x| [[x[0], 1.0, 0.0], [0.0, x[1] * x[2], 0.0], [x[2], 0.0, -x[0]]]);
    let f = make_ss_forcing(&f0, 1.0, &g).unwrap();
    assert_eq!(f, f0);
    assert!(make_ss_forcing(&f0, 0.0, &g).is_err());
}

#[test]
fn forcing_constant_for_gamma_two() {
    assert!((ss_forcing_constant(2.0).unwrap() - 2.0).abs() < 1e-6);
    assert!(ss_forcing_constant(1.0).is_err());
}

#[test]
fn space_time_forcing_norm_identity() {
    let g = GridSpec::new(32, 4.0).unwrap();
    let a = [[0.0, 1.0, 0.5], [-0.5, 0.0, 1.0], [0.25, -1.0, 0.0]];
    let f0 = TensorField::from_fn(g, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        a.map(|row| row.map(|v| v * r2 * (-r2).exp()))
    });
    for gamma in [1.5, 2.0] {
        let w = WeightSpec::plain(gamma).unwrap();
        let lhs = ss_forcing_spacetime_norm(&f0, &w, 8, 24).unwrap();
        let rhs = ss_forcing_constant(gamma).unwrap() * inverse_radius_integral(&f0);
        assert!((lhs - rhs).abs() / rhs < 0.02, "γ={gamma}: {lhs} vs {rhs}");
    }
}

#[test]
fn norm_ratio_lies_between_series_bounds() {
    let o = ops(64, 8.0);
    let env = Envelope::for_grid(o.grid());
    let spec = random_dss(2.0);
    let u = make_dss_field(&o, &spec, &env).unwrap();
    let r = dss_norm_equivalence(&u, &spec, &env).unwrap();
    let ratio = r.ratio.unwrap();
    assert!(!r.flagged);
    assert!(r.lower <= ratio && ratio <= r.upper, "{} <= {ratio} <= {}", r.lower, r.upper);
    assert!(shell_series(2.0, 2.0, -60, 60).is_finite());
}

#[test]
fn zero_field_flags_the_ratio() {
    let g = GridSpec::new(64, 8.0).unwrap();
    let env = Envelope::for_grid(&g);
    let r = dss_norm_equivalence(&VectorField::zeros(g), &random_dss(2.0), &env).unwrap();
    assert!(r.flagged && r.ratio.is_none() && r.full == 0.0);
}

#[test]
fn reference_shell_does_not_matter_for_self_similar_data() {
    let o = ops(128, 8.0);
    let env = Envelope::for_grid(o.grid());
    let spec = random_dss(2.0);
    let u = make_self_similar_field(&o, swirl, &env);
    let shells = clean_shells(&env, 2.0);
    assert!(shells.len() >= 2);
    let ratios: Vec<f64> = shells.iter().map(|k| dss_norm_equivalence_at(&u, &spec, &env, *k).unwrap().ratio.unwrap()).collect();
    let first = ratios[0];
    assert!(ratios.iter().all(|r| (r - first).abs() / first < 0.02), "{ratios:?}");
}

#[test]
fn dss_norm_converges_under_refinement() {
    let spec = random_dss(2.0);
    let w = WeightSpec::plain(2.0).unwrap();
    // Same physical envelope on both grids, so only the shells are refined.
    let env = Envelope { core: 1.0, core_ramp: 1.0, outer: 7.0, outer_ramp: 2.0 };
    let norm = |n: usize| {
        let o = ops(n, 8.0);
        weighted_norm(&make_dss_field(&o, &spec, &env).unwrap(), 2.0, &w).unwrap().value
    };
    let (a, b) = (norm(64), norm(128));
    assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn constructors_are_solenoidal(seed in 0u64..10_000, amplitude in 0.1f64..10.0) {
        let o = ops(32, 8.0);
        let env = Envelope::for_grid(o.grid());
        let spec = DssSpec::new(2.0, 2.0, ShellProfile::Random { seed, amplitude }).unwrap();
        let u = make_dss_field(&o, &spec, &env).unwrap();
        prop_assert!(div_ratio(&o, &u) < 1e-8);
        let t = truncate_data(&o, &u, 3.0).unwrap();
        prop_assert!(div_ratio(&o, &t) < 1e-8);
    }
}
