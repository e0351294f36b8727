use proptest::prelude::*;
use std::f64::consts::PI;
use wlry_core::fields::{random_scalar, random_solenoidal};
use wlry_core::mollifier::MollifierSpec;
use wlry_core::spectral::SpectralOps;
use wlry_core::weights::{weighted_norm, WeightSpec};
use wlry_core::{GridSpec, ScalarField, TensorField, VectorField};

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn vrel(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).unwrap().l2() / b.l2().max(f64::MIN_POSITIVE)
}

fn ops(n: usize, l: f64) -> SpectralOps {
    SpectralOps::new(GridSpec::new(n, l).unwrap())
}

fn riesz_sum_defect(o: &SpectralOps, f: &ScalarField) -> f64 {
    let mut sum = ScalarField::zeros(*o.grid());
    for j in 0..3 {
        sum.axpy(1.0, &o.riesz_transform(&o.riesz_transform(f, j), j)).unwrap();
    }
    let m = f.mean();
    let target: Vec<f64> = f.data.iter().map(|v| -(v - m)).collect();
    rel(&sum.data, &target)
}

#[test]
fn single_mode_riesz_sign() {
    let o = ops(16, PI);
    let g = *o.grid();
    let f = ScalarField::from_fn(g, |x| x[0].sin());
    let r = o.riesz_transform(&f, 0);
    let expected = ScalarField::from_fn(g, |x| -x[0].cos());
    assert!(rel(&r.data, &expected.data) < 1e-12);
    assert!(o.riesz_transform(&f, 1).max_abs() < 1e-12);
}

#[test]
fn riesz_of_gaussian_is_resolution_independent() {
    let f = |x: [f64; 3]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
    let coarse = ops(64, 6.0);
    let fine = ops(128, 6.0);
    let rc = coarse.riesz_transform(&ScalarField::from_fn(*coarse.grid(), f), 0);
    let rf = fine.riesz_transform(&ScalarField::from_fn(*fine.grid(), f), 0);
    let gc = coarse.grid();
    let down: Vec<f64> = (0..gc.len())
        .map(|idx| {
            let (i, j, k) = gc.unravel(idx);
            rf.data[fine.grid().index(2 * i, 2 * j, 2 * k)]
        })
        .collect();
    assert!(rel(&rc.data, &down) < 1e-6);
}

#[test]
fn leray_annihilates_gradients_and_keeps_curls() {
    let o = ops(32, PI);
    let q = random_scalar(&o, 3, 3.0);
    let grad = o.gradient(&q);
    assert!(o.leray_project(&grad).l2() < 1e-10 * grad.l2());
    let a = random_solenoidal(&o, 4, 3.0);
    let v = o.curl(&a);
    assert!(vrel(&o.leray_project(&v), &v) < 1e-10);
}

#[test]
fn pressure_of_constant_forcing_vanishes() {
    let o = ops(16, PI);
    let g = *o.grid();
    let zero = VectorField::zeros(g);
    let f = TensorField::from_fn(g, |_| [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
    let p = o.pressure_solve(&zero, &zero, Some(&f)).unwrap();
    assert!(p.max_abs() < 1e-12);
}

#[test]
fn single_mode_pressure() {
    // u = (cos y, cos x, 0) gives p = Σ R_iR_j(u_i u_j) = sin x sin y.
    let o = ops(32, PI);
    let g = *o.grid();
    let u = VectorField::from_fn(g, |x| [x[1].cos(), x[0].cos(), 0.0]);
    let p = o.pressure_solve(&u, &u, None).unwrap();
    let expected = ScalarField::from_fn(g, |x| x[0].sin() * x[1].sin());
    assert!(rel(&p.data, &expected.data) < 1e-12);
}

#[test]
fn helmholtz_split_of_the_momentum_flux() {
    let o = ops(32, PI);
    let g = *o.grid();
    let b = VectorField::from_fn(g, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin(), 0.3 * x[2].sin()]);
    let u = VectorField::from_fn(g, |x| [(2.0 * x[1]).cos(), x[2].sin(), (x[0] + x[1]).cos()]);
    let f = TensorField::from_fn(g, |x| {
        let s = x[0].sin();
        let c = (x[1] - x[2]).cos();
        [[s, c, 0.0], [0.5 * c, 0.0, s * c], [0.0, s, -c]]
    });
    let mut div = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    for i in 0..3 {
        for j in 0..3 {
            let gij: Vec<f64> = (0..g.len()).map(|n| b.comps[i][n] * u.comps[j][n] - f.comps[i][j][n]).collect();
            let d = o.gradient(&ScalarField::from_vec(g, gij).unwrap());
            for n in 0..g.len() {
                div[j][n] += d.comps[i][n];
            }
        }
    }
    let div = VectorField { grid: g, comps: div };
    let proj = o.leray_project(&div);
    assert!(o.divergence(&proj).max_abs() < 1e-9 * div.max_abs());
    let p = o.pressure_solve(&b, &u, Some(&f)).unwrap();
    let mut recon = proj.clone();
    recon.axpy(-1.0, &o.gradient(&p)).unwrap();
    assert!(vrel(&recon, &div) < 1e-9);
}

#[test]
fn mollifier_preserves_mean_and_converges() {
    let o = ops(32, PI);
    let mut f = random_scalar(&o, 9, 4.0);
    f.data.iter_mut().for_each(|v| *v += 0.7);
    let mut errs = Vec::new();
    for eps in [0.4, 0.2, 0.1, 0.05] {
        let m = o.mollify_scalar(&f, &MollifierSpec::fixed(eps).unwrap(), None).unwrap();
        assert!((m.mean() - f.mean()).abs() < 1e-12);
        errs.push(rel(&m.data, &f.data));
    }
    assert!(errs.windows(2).all(|p| p[1] < p[0]), "{errs:?}");
}

#[test]
fn time_dependent_mollifier_needs_positive_time() {
    let o = ops(8, PI);
    let f = ScalarField::zeros(*o.grid());
    let m = MollifierSpec::new(0.1, true).unwrap();
    assert!(o.mollify_scalar(&f, &m, Some(0.0)).is_err());
    assert!(o.mollify_scalar(&f, &m, None).is_err());
    assert!(o.mollify_scalar(&f, &m, Some(0.5)).is_ok());
}

#[test]
fn maximal_function_dominates_mollification() {
    let o = ops(32, PI);
    let f = random_scalar(&o, 21, 4.0);
    // Every lattice ball inside the kernel support, so the layer-cake
    // decomposition of the kernel is covered.
    let eps = 0.8;
    let h = o.grid().spacing();
    let top = ((eps / h) * (eps / h)).ceil() as usize;
    let radii: Vec<f64> = (1..=top).map(|m| h * (m as f64).sqrt()).collect();
    let mf = o.maximal_function(&f, &radii).unwrap();
    let m = o.mollify_scalar(&f, &MollifierSpec::fixed(eps).unwrap(), None).unwrap();
    let worst = m.data.iter().zip(&mf.data).map(|(a, b)| a.abs() - 1.0001 * b).fold(f64::NEG_INFINITY, f64::max);
    assert!(worst <= 0.0, "{worst}");
}

#[test]
fn maximal_function_basics() {
    let o = ops(16, 2.0);
    let g = *o.grid();
    let c = ScalarField::from_fn(g, |_| -2.5);
    let mc = o.maximal_function(&c, &o.default_radii()).unwrap();
    assert!(mc.data.iter().all(|v| (v - 2.5).abs() < 1e-12));
    let ball = ScalarField::from_fn(g, |x| if x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < 0.3 { 1.0 } else { 0.0 });
    let mb = o.maximal_function(&ball, &o.default_radii()).unwrap();
    assert!(mb.data.iter().zip(&ball.data).all(|(m, f)| *m >= f.abs() - 1e-12));
    assert!(o.maximal_function(&ball, &[]).is_err());
}

#[test]
fn maximal_operator_bound_is_stable_under_refinement() {
    let w = WeightSpec::plain(3.0).unwrap();
    let ratio = |n: usize| {
        let o = ops(n, 4.0);
        let f = ScalarField::from_fn(*o.grid(), |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])).exp());
        let mf = o.maximal_function(&f, &[0.5, 1.0, 2.0]).unwrap();
        weighted_norm(&mf, 3.0, &w).unwrap().value / weighted_norm(&f, 3.0, &w).unwrap().value
    };
    let (a, b) = (ratio(32), ratio(64));
    assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn riesz_squares_sum_to_minus_identity(seed in 0u64..1000) {
        let o = ops(16, PI);
        prop_assert!(riesz_sum_defect(&o, &random_scalar(&o, seed, 3.0)) < 1e-10);
    }

    #[test]
    fn leray_is_an_idempotent_solenoidal_projection(seed in 0u64..1000) {
        let o = ops(16, 2.0);
        let g = *o.grid();
        let mut v = random_solenoidal(&o, seed, 3.0);
        v.axpy(1.0, &o.gradient(&random_scalar(&o, seed + 1, 3.0))).unwrap();
        let p = o.leray_project(&v);
        prop_assert!(vrel(&o.leray_project(&p), &p) < 1e-10);
        prop_assert!(o.divergence(&p).l2() < 1e-10 * v.l2() * g.len() as f64);
    }
}
