use proptest::prelude::*;
use std::f64::consts::PI;
use wlry_core::region::ball_fraction;
use wlry_core::weights::{eval_weight, muckenhoupt_certificate, reverse_holder_product, sobolev_embedding_ratio, weighted_norm, Probe, WeightTable};
use wlry_core::{GridSpec, ScalarField, VectorField, WeightSpec};

fn radial(a: f64, b: f64, nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / nodes as f64;
    (0..nodes).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

fn centred(radius: f64) -> Probe {
    Probe { center: [0.0; 3], radius }
}

#[test]
fn weight_at_origin_and_unit_radius() {
    let w = WeightSpec::plain(2.0).unwrap();
    assert_eq!(eval_weight([0.0; 3], &w), 1.0);
    assert!((eval_weight([1.0, 0.0, 0.0], &w) - 0.25).abs() < 1e-15);
    assert!((eval_weight([0.0, 0.6, 0.8], &w) - 0.25).abs() < 1e-15);
}

#[test]
fn gradient_magnitude_at_unit_radius() {
    let w = WeightSpec::plain(1.0).unwrap();
    let g = w.gradient([0.0, 0.0, 1.0]);
    let m = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    assert!((m - 0.25).abs() < 1e-15);
}

#[test]
fn unit_ball_norm_matches_closed_form() {
    let exact = 4.0 * PI * (1.5 - 2.0 * std::f64::consts::LN_2);
    for (n, tol) in [(64, 0.02), (128, 0.005)] {
        let g = GridSpec::new(n, 2.0).unwrap();
        let frac = ball_fraction(&g, [0.0; 3], 1.0);
        let table = WeightTable::new(g, WeightSpec::plain(2.0).unwrap());
        let v: f64 = frac.iter().zip(&table.values).map(|(f, w)| f * w).sum::<f64>() * g.cell_volume();
        assert!((v - exact).abs() / exact < tol, "n={n}: {v} vs {exact}");
    }
}

#[test]
fn zero_field_has_zero_norm() {
    let g = GridSpec::new(16, 2.0).unwrap();
    let r = weighted_norm(&ScalarField::zeros(g), 2.0, &WeightSpec::plain(1.0).unwrap()).unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn gaussian_norm_matches_radial_oracle() {
    let g = GridSpec::new(64, 4.0).unwrap();
    let f = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
    let got = weighted_norm(&f, 2.0, &WeightSpec::plain(1.0).unwrap()).unwrap().value;
    let oracle = radial(0.0, 8.0, 100_000, |r| 4.0 * PI * r * r * (-2.0 * r * r).exp() / (1.0 + r)).sqrt();
    assert!((got - oracle).abs() / oracle < 1e-3, "{got} vs {oracle}");
}

#[test]
fn rejects_p_below_one() {
    let g = GridSpec::new(8, 1.0).unwrap();
    assert!(weighted_norm(&ScalarField::zeros(g), 0.5, &WeightSpec::plain(1.0).unwrap()).is_err());
    assert!(muckenhoupt_certificate(&WeightSpec::plain(1.0).unwrap(), 1.0, &[centred(1.0)]).is_err());
}

#[test]
fn nearly_constant_weight_has_unit_certificate() {
    let w = WeightSpec::plain(1e-8).unwrap();
    for r in [0.5, 1.0, 10.0, 100.0, 1000.0] {
        let c = reverse_holder_product(&w, 2.0, &centred(r)).unwrap();
        assert!((c - 1.0).abs() < 1e-6, "r={r}: {c}");
    }
}

#[test]
fn unit_ball_certificate_matches_oracle_and_small_ball_bound() {
    let w = WeightSpec::plain(1.0).unwrap();
    let got = reverse_holder_product(&w, 2.0, &centred(1.0)).unwrap();
    let vol = 4.0 * PI / 3.0;
    let avg_w = radial(0.0, 1.0, 100_000, |r| 4.0 * PI * r * r / (1.0 + r)) / vol;
    let avg_dual = radial(0.0, 1.0, 100_000, |r| 4.0 * PI * r * r * (1.0 + r)) / vol;
    let oracle = avg_w.sqrt() * avg_dual.sqrt();
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    assert!(got <= 2.0);
}

#[test]
fn certificate_grows_outside_the_class() {
    let w = WeightSpec::plain(3.5).unwrap();
    let c: Vec<f64> = [1.0, 10.0, 100.0, 1000.0].iter().map(|r| muckenhoupt_certificate(&w, 2.0, &[centred(*r)]).unwrap()).collect();
    assert!(c.windows(2).all(|p| p[1] > p[0]), "{c:?}");
}

#[test]
fn off_centre_probe_is_finite_and_above_one() {
    let w = WeightSpec::plain(2.0).unwrap();
    let c = reverse_holder_product(&w, 2.0, &Probe { center: [3.0, 0.0, 0.0], radius: 2.0 }).unwrap();
    assert!(c.is_finite() && c >= 1.0 - 1e-3, "{c}");
}

fn gaussian(g: GridSpec) -> ScalarField {
    ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp())
}

#[test]
fn sobolev_ratio_is_stable_and_homogeneous() {
    let w = WeightSpec::plain(1.0).unwrap();
    let coarse = sobolev_embedding_ratio(&gaussian(GridSpec::new(32, 4.0).unwrap()), &w).unwrap();
    let fine = sobolev_embedding_ratio(&gaussian(GridSpec::new(64, 4.0).unwrap()), &w).unwrap();
    assert!((coarse - fine).abs() / fine < 0.01, "{coarse} vs {fine}");
    let f = gaussian(GridSpec::new(32, 4.0).unwrap());
    let scaled = sobolev_embedding_ratio(&f.scaled(7.0), &w).unwrap();
    assert!((scaled - coarse).abs() < 1e-12 * coarse);
}

#[test]
fn sobolev_ratio_rejects_zero() {
    let g = GridSpec::new(16, 2.0).unwrap();
    assert!(sobolev_embedding_ratio(&ScalarField::zeros(g), &WeightSpec::plain(1.0).unwrap()).is_err());
}

#[test]
fn finite_difference_gradient_matches_identity() {
    let delta = 2.0;
    let w = WeightSpec::plain(delta).unwrap();
    let h = 1e-2;
    for r in [0.5, 1.0, 3.0, 10.0] {
        let fd = (eval_weight([r + h, 0.0, 0.0], &w) - eval_weight([r - h, 0.0, 0.0], &w)) / (2.0 * h);
        let exact = delta * eval_weight([r, 0.0, 0.0], &w) / (1.0 + r);
        assert!((fd.abs() - exact).abs() < h * exact, "r={r}");
    }
}

proptest! {
    #[test]
    fn weight_decreases_radially(delta in 0.01f64..5.0, eps in 0.0f64..2.0, r1 in 0.0f64..100.0, dr in 0.0f64..100.0) {
        let w = WeightSpec::new(delta, eps).unwrap();
        prop_assert!(eval_weight([r1, 0.0, 0.0], &w) >= eval_weight([0.0, r1 + dr, 0.0], &w));
    }

    #[test]
    fn weighted_norm_is_homogeneous(c in -50.0f64..50.0, p in prop::sample::select(vec![1.2, 2.0, 3.0, 10.0 / 3.0, 6.0])) {
        let g = GridSpec::new(16, 2.0).unwrap();
        let f = VectorField::from_fn(g, |x| [x[0].sin(), (x[1] * x[2]).cos(), (-x[0] * x[0]).exp()]);
        let w = WeightSpec::plain(1.5).unwrap();
        let a = weighted_norm(&f, p, &w).unwrap().value;
        let b = weighted_norm(&f.scaled(c), p, &w).unwrap().value;
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + c.abs() * a));
    }
}
