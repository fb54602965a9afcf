use std::sync::OnceLock;

use proptest::prelude::*;
use sigma_pinch::catalog::{build_catalog_manifold, CatalogId, Resolution};
use sigma_pinch::field::ScalarField;
use sigma_pinch::minimizer::{bochner_decomposition_check, minimize_ii, MinimizerConfig, QtProblem, EL_TOLERANCE};
use sigma_pinch::operators::Geometry;

fn hemisphere() -> CatalogId {
    CatalogId::Hemisphere { n: 4, r: 1.0 }
}

fn perturbed() -> CatalogId {
    CatalogId::ConformalRadial { base: Box::new(hemisphere()), coefficients: vec![0.0, 0.0, 0.1] }
}

fn shared() -> &'static QtProblem {
    static P: OnceLock<QtProblem> = OnceLock::new();
    P.get_or_init(|| QtProblem::new(&perturbed(), 64).unwrap())
}

fn field(p: &QtProblem, c: &[f64]) -> Vec<f64> {
    p.model.sample(|th| c.iter().enumerate().map(|(k, a)| a * (2.0 * k as f64 * th).cos()).sum())
}

#[test]
fn three_dimensional_input_is_rejected() {
    assert!(QtProblem::new(&CatalogId::Hemisphere { n: 3, r: 1.0 }, 32).is_err());
}

#[test]
fn gradient_matches_finite_differences() {
    let p = shared();
    let u = field(p, &[0.0, 0.05, -0.03, 0.01]);
    let (_, g) = p.value_and_gradient(&u);
    let dir = field(p, &[0.2, -0.1, 0.3, 0.05, -0.02]);
    let h = 1e-5;
    let at = |s: f64| p.value_and_gradient(&u.iter().zip(&dir).map(|(a, d)| a + s * d).collect::<Vec<_>>()).0;
    let fd = (at(h) - at(-h)) / (2.0 * h);
    let exact: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
    assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} {exact}");
}

#[test]
fn spectrum_and_kernel() {
    for id in [hemisphere(), perturbed(), CatalogId::RoundSphere { n: 4, r: 1.0 }] {
        let s = QtProblem::new(&id, 48).unwrap().spectrum();
        assert!(s.passed(), "{}: {s:?}", id.label());
        assert!(s.constant_eigenvalue.abs() <= 1e-8);
        assert!(s.second_eigenvalue > 1e-3, "{}: {}", id.label(), s.second_eigenvalue);
    }
}

fn form_gap(nodes: usize) -> f64 {
    let p = QtProblem::new(&perturbed(), nodes).unwrap();
    assert!(p.assemble_p43().asymmetry <= 1e-10);
    let fu = |th: f64| th.cos().powi(2);
    let fv = |th: f64| (2.0 * th).cos() + 0.5 * (4.0 * th).cos();
    let discrete = p.p43_value(&p.model.sample(fu), &p.model.sample(fv));
    let (grid, g) = build_catalog_manifold(&perturbed(), &Resolution::new(nodes).with_tangential(24)).unwrap();
    let u = ScalarField::from_fn(grid.clone(), |x| fu(x[0]));
    let v = ScalarField::from_fn(grid, |x| fv(x[0]));
    let full = Geometry::new(&g).unwrap().p43_form(&u, &v).unwrap();
    (discrete - full).abs() / full.abs()
}

#[test]
fn assembled_operator_matches_the_quadratic_form() {
    let (coarse, fine) = (form_gap(64), form_gap(128));
    assert!(fine <= 1e-5, "{coarse} {fine}");
}

#[test]
fn round_hemisphere_has_no_residual_at_zero() {
    let p = QtProblem::new(&hemisphere(), 64).unwrap();
    let r = p.el_residual(&vec![0.0; p.len()]).unwrap();
    assert!(r.max() <= 1e-8, "{r:?}");
    let (_, g) = p.value_and_gradient(&vec![0.0; p.len()]);
    assert!(g.iter().all(|v| v.abs() <= 1e-10));
}

#[test]
fn round_minimizer_is_constant() {
    let p = QtProblem::new(&hemisphere(), 64).unwrap();
    let cfg = MinimizerConfig { nodes: 64, initial: vec![0.0, 0.1], ..MinimizerConfig::default() };
    let s = minimize_ii(&p, &cfg).unwrap();
    let (lo, hi) = s.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi - lo <= 1e-6, "{lo} {hi}");
    assert!(p.el_residual_of(&s).unwrap().max() <= EL_TOLERANCE);
    for rec in &s.trace {
        assert!(rec.normalization_residual <= 1e-10, "{rec:?}");
    }
    assert!(s.trace.windows(2).all(|w| w[1].ii <= w[0].ii + 1e-12));
}

#[test]
fn perturbed_minimizer_decreases_the_functional() {
    let p = shared();
    let s = minimize_ii(p, &MinimizerConfig { nodes: 64, ..MinimizerConfig::default() }).unwrap();
    assert!(s.grad_norm <= 1e-8);
    assert!(s.value <= p.value_and_gradient(&vec![0.0; p.len()]).0 + 1e-12);
    assert!(s.normalization_residual <= 1e-10);
    // e^{2u} undoes the factor e^{0.2cos²θ}
    let exact = p.model.sample(|th| -0.1 * th.cos().powi(2));
    let offset = s.u[0] - exact[0];
    let worst = s.u.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b - offset).abs()));
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn bochner_decomposition() {
    let (grid, g) = build_catalog_manifold(&CatalogId::FlatTorus { n: 4 }, &Resolution::new(24)).unwrap();
    let u = ScalarField::from_fn(grid, |x| x[0].sin() * x[1].cos() + 0.3 * (x[2] + 2.0 * x[3]).cos());
    let r = bochner_decomposition_check(&Geometry::new(&g).unwrap(), &u).unwrap();
    assert!(r.relative <= 1e-3, "{r:?}");
    let (grid, g) = build_catalog_manifold(&hemisphere(), &Resolution::new(48).with_tangential(16)).unwrap();
    let u = ScalarField::from_fn(grid, |x| (2.0 * x[0]).cos());
    let r = bochner_decomposition_check(&Geometry::new(&g).unwrap(), &u).unwrap();
    assert!(r.relative <= 1e-3, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn functional_ignores_constants(c in -1.0f64..=1.0, a in proptest::array::uniform3(-0.1f64..0.1)) {
        let p = shared();
        let u = field(p, &[0.0, a[0], a[1], a[2]]);
        let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
        let (v0, v1) = (p.value_and_gradient(&u).0, p.value_and_gradient(&shifted).0);
        prop_assert!((v0 - v1).abs() <= 1e-9 * v0.abs().max(1.0), "{} {}", v0, v1);
    }
}
