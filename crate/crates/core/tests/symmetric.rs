use num_rational::Ratio;
use proptest::prelude::*;
use sigma_pinch::catalog::{build_catalog_manifold, CatalogId, Resolution};
use sigma_pinch::curvature::compute_curvature;
use sigma_pinch::field::{MetricField, SymTensor2Field};
use sigma_pinch::linalg::{min_eigenvalue, Mat, ZERO};
use sigma_pinch::scalar::binomial;
use sigma_pinch::symmetric::{
    cone_check, cone_lemma_suite, contract, elementary, matrix_elementary, maclaurin_constant, newton_and_lt,
    newton_transform, sigma_k, trace, Spectrum,
};

type Q = Ratio<i64>;

fn diag(v: &[f64]) -> Mat {
    let mut m = ZERO;
    for (i, x) in v.iter().enumerate() {
        m[i][i] = *x;
    }
    m
}

fn flat3() -> MetricField {
    build_catalog_manifold(&CatalogId::FlatTorus { n: 3 }, &Resolution::new(8)).unwrap().1
}

fn constant_field(g: &MetricField, a: Mat) -> SymTensor2Field {
    SymTensor2Field::from_fn(g.grid().clone(), move |_| a)
}

#[test]
fn sigma2_of_round_schouten_spectra() {
    // unit S⁴: R = 12, E = 0, so R²/96 − |E|²/8 = 3/2
    let s4 = Spectrum::new(vec![Q::new(1, 2); 4]);
    assert_eq!(sigma_k(&s4, 2).unwrap(), Q::new(144, 96));
    // unit S³: 3R²/16 − |Ric|²/2 = 27/4 − 6
    let s3 = Spectrum::new(vec![Q::new(1, 2); 3]);
    assert_eq!(sigma_k(&s3, 2).unwrap(), Q::new(27, 4) - Q::from_integer(6));
}

#[test]
fn cone_membership_examples() {
    let g = flat3();
    let inside = cone_check(&constant_field(&g, diag(&[1.0, 1.0, -0.4])), &g, 2).unwrap();
    assert!(inside.member(1) && inside.member(2));
    assert!((inside.top().min_margin - 0.2).abs() < 1e-12);
    let edge = cone_check(&constant_field(&g, diag(&[1.0, 1.0, -0.5])), &g, 2).unwrap();
    assert!(edge.member(1));
    assert!(!edge.member(2));
}

#[test]
fn round_schouten_is_in_the_positive_cone() {
    for n in [3, 4] {
        let (_, g) = build_catalog_manifold(&CatalogId::RoundSphere { n, r: 1.0 }, &Resolution::new(12)).unwrap();
        let c = compute_curvature(&g).unwrap();
        let report = cone_check(&c.schouten(), &g, n).unwrap();
        assert!(report.member(n));
        // σ_n(½, …, ½)
        assert!((report.top().min_margin - 0.5f64.powi(n as i32)).abs() < 1e-6);
    }
}

#[test]
fn inclusion_chain_is_enforced() {
    let g = flat3();
    // σ₃ = 0.02 > 0 but σ₁ < 0
    let r = cone_check(&constant_field(&g, diag(&[-1.0, -0.2, 0.1])), &g, 3).unwrap();
    assert!(!r.member(1) && !r.member(2) && !r.member(3));
    assert!(r.levels[2].min_margin < 0.0);
}

#[test]
fn newton_transformation_of_diagonal() {
    let p = newton_and_lt(&diag(&[1.0, 2.0, 3.0]), &diag(&[1.0; 3]), 3, 2, 0.5).unwrap();
    let t = p.newton;
    assert_eq!([t[0][0], t[1][1], t[2][2]], [5.0, 4.0, 3.0]);
    let contraction: f64 = (0..3).map(|i| t[i][i] * (i + 1) as f64).sum();
    assert_eq!(contraction, 22.0);
    assert_eq!(t[0][0] + t[1][1] + t[2][2], 12.0);
    // L^t = T + ((1 − t)/(n − 2)) tr T · I
    assert_eq!(p.lt[0][0], 5.0 + 0.5 * 12.0);
}

#[test]
fn maclaurin_example() {
    let e = elementary(&[1.0f64, 2.0, 3.0]);
    assert_eq!((e[1], e[2]), (6.0, 11.0));
    let bound = maclaurin_constant::<f64>(3, 2) * e[2].sqrt();
    assert!((bound - 3f64.sqrt() * 11f64.sqrt()).abs() < 1e-14);
    assert!(e[1] >= bound);
}

#[test]
fn garding_matrices_example() {
    // −A + σ₁g is T₁(A)
    let p = newton_and_lt(&diag(&[1.0, 1.0, -0.4]), &diag(&[1.0; 3]), 3, 2, 1.0).unwrap();
    let m = p.newton;
    assert!((m[0][0] - 0.6).abs() < 1e-15 && (m[1][1] - 0.6).abs() < 1e-15 && (m[2][2] - 2.0).abs() < 1e-15);
    assert!(p.min_eigenvalues().0 > 0.0);
}

#[test]
fn property_suite_is_clean() {
    for n in [3, 4] {
        let r = cone_lemma_suite(11, 2000, n).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.max_identity_error <= 1e-12);
    }
}

#[test]
fn property_suite_is_seeded() {
    assert_eq!(cone_lemma_suite(3, 300, 4).unwrap(), cone_lemma_suite(3, 300, 4).unwrap());
    assert_ne!(cone_lemma_suite(3, 300, 4).unwrap(), cone_lemma_suite(4, 300, 4).unwrap());
}

fn rational_symmetric(n: usize, entries: &[i64]) -> Vec<Vec<Q>> {
    let mut m = vec![vec![Q::from_integer(0); n]; n];
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let v = Q::new(entries[k], 1 + (k as i64 % 3));
            m[i][j] = v;
            m[j][i] = v;
            k += 1;
        }
    }
    m
}

fn spd(n: usize, seed: &[f64]) -> Mat {
    // B Bᵀ + I with B lower triangular
    let mut b = ZERO;
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            b[i][j] = seed[k];
            k += 1;
        }
    }
    let mut g = ZERO;
    for i in 0..n {
        for j in 0..n {
            g[i][j] = (0..n).map(|l| b[i][l] * b[j][l]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sigma_of_scaled_identity(c in 0.01f64..10.0, n in 3usize..=4) {
        let s = Spectrum::new(vec![c; n]);
        for k in 1..=n {
            let expect = c.powi(k as i32) * binomial::<f64>(n, k);
            prop_assert!((sigma_k(&s, k).unwrap() - expect).abs() <= 1e-13 * expect);
        }
    }

    #[test]
    fn newton_identities_are_exact(entries in proptest::collection::vec(-9i64..=9, 10), n in 3usize..=4) {
        let a = rational_symmetric(n, &entries);
        let e = matrix_elementary(&a);
        for k in 1..=n {
            let t = newton_transform(&a, k).unwrap();
            prop_assert_eq!(contract(&t, &a), e[k] * Q::from_integer(k as i64));
            prop_assert_eq!(trace(&t), e[k - 1] * Q::from_integer((n - k + 1) as i64));
        }
    }

    #[test]
    fn diagonal_minors_match_spectrum(entries in proptest::collection::vec(-20i64..=20, 4)) {
        let n = 4;
        let mut a = vec![vec![Q::from_integer(0); n]; n];
        let values: Vec<Q> = entries.iter().map(|v| Q::new(*v, 7)).collect();
        for i in 0..n {
            a[i][i] = values[i];
        }
        prop_assert_eq!(matrix_elementary(&a), elementary(&values));
    }

    #[test]
    fn cone_implies_positive_newton_and_lt(
        l in proptest::array::uniform4(-1.0f64..3.0),
        seed in proptest::collection::vec(-0.7f64..0.7, 10),
        t in -3.0f64..=1.0,
        n in 3usize..=4,
    ) {
        let g = spd(n, &seed);
        // the pencil (g D g, g) has the spectrum of D g
        let mut a = ZERO;
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|m| g[i][m] * l[m] * g[m][j]).sum();
            }
        }
        let spec = Spectrum::of_pencil(n, &a, &g).unwrap();
        let e = spec.elementary();
        prop_assume!(e[1] > 1e-6 && e[2] > 1e-6);
        let p = newton_and_lt(&a, &g, n, 2, t).unwrap();
        prop_assert!(min_eigenvalue(n, &p.newton) > 0.0);
        prop_assert!(min_eigenvalue(n, &p.lt) > 0.0);
    }

    #[test]
    fn concavity_is_tight_on_the_diagonal(l in proptest::array::uniform3(0.1f64..3.0), rho in 0.0f64..=1.0) {
        // σ₂^{1/2}(ρA + (1 − ρ)A) = ρσ₂^{1/2}(A) + (1 − ρ)σ₂^{1/2}(A)
        let s = |v: &[f64]| elementary(v)[2].sqrt();
        let mix: Vec<f64> = l.iter().map(|x| rho * x + (1.0 - rho) * x).collect();
        prop_assert!((s(&mix) - s(&l)).abs() <= 1e-14 * s(&l));
    }
}
