use approx::assert_relative_eq;
use proptest::prelude::*;
use sigma_pinch::boundary::compute_boundary;
use sigma_pinch::catalog::{build_catalog_manifold, radial_polynomial, CatalogId, Resolution};
use sigma_pinch::curvature::{compute_curvature, schouten_generalized, CurvatureBundle};
use sigma_pinch::field::MetricField;
use sigma_pinch::symmetric::Spectrum;

fn build(id: &CatalogId, res: Resolution) -> (MetricField, CurvatureBundle) {
    let (_, g) = build_catalog_manifold(id, &res).unwrap();
    let c = compute_curvature(&g).unwrap();
    (g, c)
}

fn max_ricci_defect(g: &MetricField, c: &CurvatureBundle, k: f64) -> f64 {
    let n = g.dim();
    let mut worst = 0.0f64;
    for l in 0..g.grid().len() {
        let (ric, gm) = (c.ricci_at(l), g.at(l));
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((ric[i][j] - k * gm[i][j]).abs());
            }
        }
    }
    worst
}

fn radial(n: usize, coefficients: &[f64], closed: bool) -> CatalogId {
    let base = if closed { CatalogId::RoundSphere { n, r: 1.0 } } else { CatalogId::Hemisphere { n, r: 1.0 } };
    CatalogId::ConformalRadial { base: Box::new(base), coefficients: coefficients.to_vec() }
}

#[test]
fn flat_torus_is_flat() {
    let (_, c) = build(&CatalogId::FlatTorus { n: 3 }, Resolution::new(16));
    assert!(c.scalar().max_abs() <= 1e-10);
    assert!(c.ricci_norm2().max_abs() <= 1e-20);
    assert!(c.weyl_norm2().max_abs() <= 1e-20);
}

#[test]
fn round_three_sphere() {
    let (g, c) = build(&CatalogId::RoundSphere { n: 3, r: 1.0 }, Resolution::new(32));
    let r = c.scalar();
    assert!(r.values.iter().all(|v| (v - 6.0).abs() <= 1e-5));
    assert!(max_ricci_defect(&g, &c, 2.0) <= 1e-5);
}

#[test]
fn round_four_sphere_coarse() {
    let (g, c) = build(&CatalogId::RoundSphere { n: 4, r: 1.0 }, Resolution::new(16));
    assert!(c.scalar().values.iter().all(|v| (v - 12.0).abs() <= 1e-5));
    assert!(max_ricci_defect(&g, &c, 3.0) <= 1e-5);
    assert!(c.weyl_norm2().max_abs().sqrt() <= 1e-8);
    assert!(c.trace_free_norm2().max_abs().sqrt() <= 1e-8);
}

#[test]
fn radius_scales_curvature() {
    let (g, c) = build(&CatalogId::RoundSphere { n: 3, r: 2.0 }, Resolution::new(16));
    assert!(c.scalar().values.iter().all(|v| (v - 1.5).abs() <= 1e-6));
    assert!(max_ricci_defect(&g, &c, 0.5) <= 1e-6);
}

#[test]
fn algebraic_symmetries_on_deformed_metrics() {
    for (id, res) in [
        (radial(3, &[0.0, 0.2, 0.1], true), Resolution::new(24)),
        (radial(4, &[0.0, 0.0, 0.1], false), Resolution::new(16)),
    ] {
        let (g, c) = build(&id, res);
        let d = c.algebraic_defects(&g);
        assert!(d.symmetry <= 1e-9, "{d:?}");
        assert!(d.bianchi <= 1e-9, "{d:?}");
        assert!(d.trace_free_trace <= 1e-9, "{d:?}");
        assert!(d.weyl_trace <= 1e-9, "{d:?}");
        if g.dim() == 3 {
            assert!(c.weyl_norm2().max_abs().sqrt() <= 1e-8);
        }
    }
}

#[test]
fn contracted_bianchi() {
    for id in [radial(3, &[0.0, 0.2, 0.1], true), CatalogId::Hemisphere { n: 3, r: 1.0 }] {
        let (_, c) = build(&id, Resolution::new(64).with_tangential(32));
        let s = c.schur_residual();
        assert!(s <= 1e-3, "{} {s}", id.label());
    }
}

/// `R̃ = e^{−2w}(6 − 4Δw − 2|∇w|²)` for `e^{2w}` times the unit 3-sphere, radial `w`.
fn conformal_scalar(c: &[f64], theta: f64) -> f64 {
    let w = radial_polynomial(c, theta);
    let (s, co) = theta.sin_cos();
    let (mut d1, mut d2) = (0.0, 0.0);
    for (k, ck) in c.iter().enumerate() {
        let k = k as i32;
        if k >= 1 {
            d1 += ck * k as f64 * co.powi(k - 1) * -s;
            d2 += ck * k as f64 * -co.powi(k);
        }
        if k >= 2 {
            d2 += ck * (k * (k - 1)) as f64 * co.powi(k - 2) * s * s;
        }
    }
    let lap = d2 + 2.0 * co / s * d1;
    (-2.0 * w).exp() * (6.0 - 4.0 * lap - 2.0 * d1 * d1)
}

fn scalar_error(c: &[f64], n: usize) -> f64 {
    let (g, curv) = build(&radial(3, c, true), Resolution::new(n));
    let grid = g.grid();
    let r = curv.scalar();
    (0..grid.len()).map(|l| (r.values[l] - conformal_scalar(c, grid.coords(l)[0])).abs()).fold(0.0, f64::max)
}

#[test]
fn scalar_curvature_converges_on_deformed_sphere() {
    let c = [0.0, 0.3, 0.2];
    let (e1, e2) = (scalar_error(&c, 16), scalar_error(&c, 32));
    let order = (e1 / e2).log2();
    assert!(e2 < 1e-4, "{e1} {e2}");
    assert!(order >= 3.0, "order {order} ({e1} {e2})");
}

#[test]
fn equator_is_totally_geodesic() {
    for n in [3, 4] {
        let (_, g) = build_catalog_manifold(&CatalogId::Hemisphere { n, r: 1.0 }, &Resolution::new(16)).unwrap();
        let bb = compute_boundary(&g).unwrap();
        assert!(bb.max_second_fundamental() <= 1e-6);
        assert!(bb.mean_curvature.max_abs() <= 1e-6);
        assert!(bb.codazzi.max_abs() <= 1e-4);
    }
}

#[test]
fn neumann_factor_keeps_boundary_geodesic() {
    // w = 0.1 cos²θ has w′(π/2) = 0
    let (_, g) = build_catalog_manifold(&radial(3, &[0.0, 0.0, 0.1], false), &Resolution::new(32)).unwrap();
    let bb = compute_boundary(&g).unwrap();
    assert!(bb.max_second_fundamental() <= 1e-6, "{}", bb.max_second_fundamental());
    assert!(bb.codazzi.max_abs() <= 1e-4);
    // w = 0.1 cos θ does not: L̃ = e^{−w}∂_ν w g̃ with |∂_ν w| = 0.1 and w = 0 on the equator
    let (_, g) = build_catalog_manifold(&radial(3, &[0.0, 0.1], false), &Resolution::new(32)).unwrap();
    let bb = compute_boundary(&g).unwrap();
    assert_relative_eq!(bb.mean_curvature.max_abs(), 0.1, max_relative = 1e-6);
    assert_relative_eq!(bb.max_second_fundamental(), 0.1 * 2f64.sqrt(), max_relative = 1e-6);
}

fn pencil_eigenvalues(g: &MetricField, a: &sigma_pinch::field::SymTensor2Field, node: usize) -> Vec<f64> {
    Spectrum::of_pencil(g.dim(), &a.at(node), &g.at(node)).unwrap().values().to_vec()
}

#[test]
fn generalized_schouten_on_round_spheres() {
    let (g4, c4) = build(&CatalogId::RoundSphere { n: 4, r: 1.0 }, Resolution::new(16));
    let a = schouten_generalized(&c4, &g4, 1.0);
    for node in [0, 17, 400] {
        for v in pencil_eigenvalues(&g4, &a.tensor, node) {
            assert!((v - 0.5).abs() <= 1e-6);
        }
    }
    let (g3, c3) = build(&CatalogId::RoundSphere { n: 3, r: 1.0 }, Resolution::new(16));
    let a0 = schouten_generalized(&c3, &g3, 0.0);
    let a23 = schouten_generalized(&c3, &g3, 2.0 / 3.0);
    for node in [0, 33, 700] {
        let ric = c3.ricci_at(node);
        let at = a0.tensor.at(node);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(at[i][j], ric[i][j]);
            }
        }
        for v in pencil_eigenvalues(&g3, &a23.tensor, node) {
            assert!((v - 1.0).abs() <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generalized_schouten_shifts_by_trace(t in -2.0f64..1.5, c1 in -0.2f64..0.2, c2 in -0.2f64..0.2) {
        let (g, c) = build(&radial(3, &[0.0, c1, c2], true), Resolution::new(12));
        let a1 = schouten_generalized(&c, &g, 1.0);
        let at = schouten_generalized(&c, &g, t);
        let n = 3.0;
        for node in (0..g.grid().len()).step_by(37) {
            let s1: f64 = pencil_eigenvalues(&g, &a1.tensor, node).iter().sum();
            let (m1, mt, gm) = (a1.tensor.at(node), at.tensor.at(node), g.at(node));
            for i in 0..3 {
                for j in 0..3 {
                    let expect = m1[i][j] + (1.0 - t) / (n - 2.0) * s1 * gm[i][j];
                    prop_assert!((mt[i][j] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
                }
            }
        }
    }
}
