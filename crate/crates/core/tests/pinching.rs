use std::f64::consts::PI;

use approx::assert_relative_eq;
use sigma_pinch::catalog::{build_catalog_manifold, CatalogId, Resolution};
use sigma_pinch::field::MetricField;
use sigma_pinch::pinching::{diagnose, margerin_wp, PinchOptions, PinchReport};

fn metric(id: &CatalogId, n: usize) -> MetricField {
    build_catalog_manifold(id, &Resolution::new(n).with_tangential(12)).unwrap().1
}

fn radial(base: CatalogId, coefficients: &[f64]) -> CatalogId {
    CatalogId::ConformalRadial { base: Box::new(base), coefficients: coefficients.to_vec() }
}

fn report(id: &CatalogId, opts: &PinchOptions) -> PinchReport {
    diagnose(&metric(id, 24), opts).unwrap()
}

fn flags(r: &PinchReport) -> Vec<(String, bool)> {
    r.conditions.iter().map(|c| (c.name.clone(), c.satisfied)).collect()
}

#[test]
fn round_three_sphere_ricci_pinching() {
    let r = report(&CatalogId::RoundSphere { n: 3, r: 1.0 }, &PinchOptions { t: 0.5, ..Default::default() });
    let c = r.get("catino-djadli").unwrap();
    let vol = 2.0 * PI * PI;
    assert_relative_eq!(c.lhs, 12.0 * vol, max_relative = 1e-4);
    assert_relative_eq!(c.rhs, 13.5 * vol, max_relative = 1e-4);
    assert_relative_eq!(c.margin, 1.5 * vol, max_relative = 1e-3);
    assert!(c.satisfied);
    assert!(r.get("sigma2-integral").unwrap().satisfied);
    assert!(r.get("yamabe-gap").unwrap().satisfied);
    assert!(r.get("sigma2-yamabe").is_none());
    let with_c = report(&CatalogId::RoundSphere { n: 3, r: 1.0 }, &PinchOptions { t: 0.5, constant_c: Some(2.0), ..Default::default() });
    assert!(with_c.get("sigma2-yamabe").unwrap().satisfied);
    assert!(with_c.get("sigma2-integral").is_none());
}

#[test]
fn round_hemisphere_values() {
    let y = 8.0 * 3f64.sqrt() * PI;
    let r = report(&CatalogId::Hemisphere { n: 4, r: 1.0 }, &PinchOptions { yamabe: Some(y), ..Default::default() });
    assert!(!r.yamabe_is_proxy);
    let ky = r.get("kappa-yamabe").unwrap();
    assert_relative_eq!(ky.lhs, 36.0 * PI * PI, max_relative = 1e-4);
    let kw = r.get("kappa-weyl").unwrap();
    assert_relative_eq!(kw.lhs, 4.0 * PI * PI, max_relative = 1e-4);
    assert!(kw.rhs.abs() <= 1e-10);
    assert!(r.conditions.iter().all(|c| c.satisfied), "{:?}", r.conditions);
    assert!(r.errors.is_empty());
    let proxy = report(&CatalogId::Hemisphere { n: 4, r: 1.0 }, &PinchOptions::default());
    assert!(proxy.yamabe_is_proxy);
    assert_relative_eq!(proxy.yamabe, y, max_relative = 1e-4);
}

#[test]
fn satisfied_is_exactly_positive_margin() {
    for id in [CatalogId::Hemisphere { n: 4, r: 1.0 }, CatalogId::FlatTorus { n: 4 }, CatalogId::FlatTorus { n: 3 }] {
        for c in report(&id, &PinchOptions::default()).conditions {
            assert_eq!(c.satisfied, c.margin > 0.0, "{c:?}");
        }
    }
}

#[test]
fn weak_pinching() {
    let (_, wp) = margerin_wp(&metric(&CatalogId::RoundSphere { n: 4, r: 1.0 }, 16)).unwrap();
    assert!(wp.abs() <= 1e-12);
    assert!(margerin_wp(&metric(&CatalogId::FlatTorus { n: 4 }, 8)).is_err());
    let r = report(&CatalogId::FlatTorus { n: 3 }, &PinchOptions::default());
    assert_eq!(r.errors.len(), 1);
    assert_eq!(r.errors[0].name, "margerin-wp");
    assert!(r.get("margerin-wp").is_none());
}

#[test]
fn weak_pinching_shrinks_with_the_perturbation() {
    let wp: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|a| margerin_wp(&metric(&radial(CatalogId::RoundSphere { n: 4, r: 1.0 }, &[0.0, 0.0, *a]), 24)).unwrap().1)
        .collect();
    assert!(wp[0] < 1.0 / 6.0, "{wp:?}");
    assert!(wp[0] > wp[1] && wp[1] > wp[2] && wp[2] > 0.0, "{wp:?}");
}

#[test]
fn both_cgy_forms_agree() {
    for id in [
        CatalogId::RoundSphere { n: 4, r: 1.0 },
        CatalogId::Hemisphere { n: 4, r: 1.0 },
        radial(CatalogId::Hemisphere { n: 4, r: 1.0 }, &[0.0, 0.0, 0.3]),
        radial(CatalogId::RoundSphere { n: 4, r: 1.0 }, &[0.0, 0.4, 0.3]),
    ] {
        let r = report(&id, &PinchOptions::default());
        let (a, b) = (r.get("cgy-integral").unwrap(), r.get("cgy-kappa").unwrap());
        assert_eq!(a.satisfied, b.satisfied, "{}", id.label());
        // ∫(|W|² + 2|E|² − R²/6) = 8((1/8)∫|W|² − κ)
        let scale = a.lhs.abs().max(8.0 * b.lhs.abs());
        assert!((a.lhs + 8.0 * b.margin).abs() <= 1e-3 * scale, "{}: {} {}", id.label(), a.lhs, b.margin);
    }
}

#[test]
fn scale_does_not_change_the_verdict() {
    for base_dim in [3, 4] {
        let at = |r: f64| {
            let base = CatalogId::RoundSphere { n: base_dim, r };
            report(&radial(base, &[0.0, 0.3, 0.2]), &PinchOptions { t: 0.5, ..Default::default() })
        };
        let reference = flags(&at(1.0));
        for c in [0.5, 2.0] {
            assert_eq!(flags(&at(c)), reference, "dimension {base_dim}, scale {c}");
        }
    }
}

#[test]
fn alpha_outside_the_unit_interval_is_rejected() {
    let g = metric(&CatalogId::Hemisphere { n: 4, r: 1.0 }, 16);
    assert!(diagnose(&g, &PinchOptions { alpha: 1.5, ..Default::default() }).is_err());
}
