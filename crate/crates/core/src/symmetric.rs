//! Elementary symmetric functions, Newton transformations and the cones Γ_k⁺.
//!
//! The polynomial layer is generic over [`Scalar`] and is exercised on exact
//! rationals in the tests. Node-level and field-level entry points work in
//! `f64` and take eigenvalues of the pencil `(A, g)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, SymTensor2Field};
use crate::linalg::{self, Mat, ZERO};
use crate::scalar::{binomial, RealScalar, Scalar};

/// Strict margin for membership in the open cones.
pub const CONE_MARGIN: f64 = 1e-10;

/// Square matrix for the generic layer.
pub type SquareMatrix<T> = Vec<Vec<T>>;

/// Eigenvalues of `g⁻¹A` at a node, descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> Spectrum<T> {
    /// Sorts the values into descending order.
    pub fn new(mut values: Vec<T>) -> Self {
        values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        Spectrum { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `σ₀ … σ_n`.
    pub fn elementary(&self) -> Vec<T> {
        elementary(&self.values)
    }
}

impl Spectrum<f64> {
    /// Spectrum of the pencil `(a, g)`; `None` unless `g` is positive definite.
    pub fn of_pencil(n: usize, a: &Mat, g: &Mat) -> Option<Self> {
        linalg::pencil_eigenvalues(n, a, g).map(|values| Spectrum { values })
    }
}

/// Coefficients of `Π (1 + λ_i x)`, i.e. `σ₀ = 1, σ₁, …, σ_n`.
pub fn elementary<T: Scalar>(values: &[T]) -> Vec<T> {
    let n = values.len();
    let mut e = vec![T::zero(); n + 1];
    e[0] = T::one();
    for (i, l) in values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] = e[j].clone() + l.clone() * e[j - 1].clone();
        }
    }
    e
}

pub fn sigma_k<T: Scalar>(spec: &Spectrum<T>, k: usize) -> Result<T> {
    check_k(spec.dim(), k)?;
    Ok(spec.elementary().swap_remove(k))
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

/// `(k/(n−k+1)) (n choose k)^{1/k}`, the Maclaurin constant with
/// `σ_{k−1} ≥ c σ_k^{(k−1)/k}` on Γ_k⁺.
pub fn maclaurin_constant<T: RealScalar>(n: usize, k: usize) -> T {
    let kk = T::from_count(k);
    kk / T::from_count(n - k + 1) * binomial::<T>(n, k).powf(kk.recip())
}

fn determinant<T: Scalar>(m: &[Vec<T>]) -> T {
    match m.len() {
        0 => T::one(),
        1 => m[0][0].clone(),
        n => {
            let mut acc = T::zero();
            for c in 0..n {
                let minor: SquareMatrix<T> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, v)| v.clone()).collect()).collect();
                let term = m[0][c].clone() * determinant(&minor);
                acc = if c % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
    }
}

/// `σ_j(A)` for `j = 0..=n` as sums of principal minors.
pub fn matrix_elementary<T: Scalar>(a: &[Vec<T>]) -> Vec<T> {
    let n = a.len();
    let mut e = vec![T::zero(); n + 1];
    for mask in 0usize..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sub: SquareMatrix<T> = idx.iter().map(|&i| idx.iter().map(|&j| a[i][j].clone()).collect()).collect();
        e[idx.len()] = e[idx.len()].clone() + determinant(&sub);
    }
    e
}

fn identity<T: Scalar>(n: usize) -> SquareMatrix<T> {
    (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect()
}

fn matmul<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> SquareMatrix<T> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(T::zero(), |s, l| s + a[i][l].clone() * b[l][j].clone())).collect())
        .collect()
}

/// `T_{k−1}(A) = Σ_{j<k} (−1)^j σ_{k−1−j}(A) A^j`, evaluated as
/// `T_j = σ_j I − A T_{j−1}`.
pub fn newton_transform<T: Scalar>(a: &[Vec<T>], k: usize) -> Result<SquareMatrix<T>> {
    let n = a.len();
    check_k(n, k)?;
    let e = matrix_elementary(a);
    let mut t = identity::<T>(n);
    for ej in e.iter().take(k).skip(1) {
        let at = matmul(a, &t);
        t = (0..n)
            .map(|i| (0..n).map(|l| if i == l { ej.clone() - at[i][l].clone() } else { T::zero() - at[i][l].clone() }).collect())
            .collect();
    }
    Ok(t)
}

pub fn trace<T: Scalar>(a: &[Vec<T>]) -> T {
    (0..a.len()).fold(T::zero(), |s, i| s + a[i][i].clone())
}

/// `Σ_ij a_ij b_ij`.
pub fn contract<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> T {
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s)).fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Newton transformation and its `t`-modification, in a `g`-orthonormal frame.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonPair {
    pub n: usize,
    pub k: usize,
    pub t: f64,
    pub newton: Mat,
    pub lt: Mat,
}

impl NewtonPair {
    pub fn min_eigenvalues(&self) -> (f64, f64) {
        (linalg::min_eigenvalue(self.n, &self.newton), linalg::min_eigenvalue(self.n, &self.lt))
    }
}

fn to_square(n: usize, m: &Mat) -> SquareMatrix<f64> {
    (0..n).map(|i| m[i][..n].to_vec()).collect()
}

fn from_square(m: &[Vec<f64>]) -> Mat {
    let mut out = ZERO;
    for (i, row) in m.iter().enumerate() {
        out[i][..row.len()].copy_from_slice(row);
    }
    out
}

pub fn newton_and_lt(a: &Mat, g: &Mat, n: usize, k: usize, t: f64) -> Result<NewtonPair> {
    if !(3..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("dimension {n} not in {{3, 4}}")));
    }
    let s = linalg::symmetrize(n, a, g).ok_or(Error::NotPositiveDefinite { node: 0, min_eigenvalue: f64::NAN })?;
    let newton = newton_transform(&to_square(n, &s), k)?;
    let c = (1.0 - t) / (n as f64 - 2.0) * trace(&newton);
    let mut lt = newton.clone();
    for (i, row) in lt.iter_mut().enumerate() {
        row[i] += c;
    }
    Ok(NewtonPair { n, k, t, newton: from_square(&newton), lt: from_square(&lt) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeLevel {
    pub k: usize,
    pub member: bool,
    pub min_margin: f64,
    pub worst_node: usize,
}

/// Levels `1..=k`; the margin of level `j` is `min_nodes min_{i≤j} σ_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub levels: Vec<ConeLevel>,
}

impl ConeReport {
    pub fn member(&self, k: usize) -> bool {
        self.levels.get(k.wrapping_sub(1)).is_some_and(|l| l.member)
    }

    pub fn top(&self) -> &ConeLevel {
        self.levels.last().expect("cone report has at least one level")
    }
}

/// Per-node `σ₀ … σ_n` of the pencil `(A, g)`.
pub fn node_elementary(a: &SymTensor2Field, g: &MetricField) -> Result<Vec<Vec<f64>>> {
    same_grid(&a.grid, g.grid())?;
    let n = g.dim();
    (0..g.grid().len())
        .into_par_iter()
        .map(|node| {
            let spec = Spectrum::of_pencil(n, &a.at(node), &g.at(node))
                .ok_or(Error::NotPositiveDefinite { node, min_eigenvalue: f64::NAN })?;
            let e = spec.elementary();
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node });
            }
            Ok(e)
        })
        .collect()
}

pub fn cone_check(a: &SymTensor2Field, g: &MetricField, k: usize) -> Result<ConeReport> {
    check_k(g.dim(), k)?;
    let e = node_elementary(a, g)?;
    let mut levels = Vec::with_capacity(k);
    let mut running: Vec<f64> = vec![f64::INFINITY; e.len()];
    for j in 1..=k {
        let (mut worst, mut margin) = (0, f64::INFINITY);
        for (node, (r, ej)) in running.iter_mut().zip(&e).enumerate() {
            *r = r.min(ej[j]);
            if *r < margin {
                margin = *r;
                worst = node;
            }
        }
        let member = margin > CONE_MARGIN && levels.last().is_none_or(|l: &ConeLevel| l.member);
        levels.push(ConeLevel { k: j, member, min_margin: margin, worst_node: worst });
    }
    Ok(ConeReport { levels })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub evaluated: usize,
    pub violations: usize,
    /// Smallest slack observed; negative values are violations.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub check: String,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub n: usize,
    pub seed: u64,
    pub trials: usize,
    pub rejected: usize,
    pub max_identity_error: f64,
    pub checks: Vec<CheckSummary>,
    pub violations: Vec<Violation>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }
}

/// Tolerance for the exact identities, relative to `max(1, |rhs|)`.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
const INEQUALITY_SLACK: f64 = 1e-12;
const MAX_RECORDED: usize = 32;

const CHECKS: [&str; 7] = [
    "newton-identities",
    "newton-positive",
    "lt-positive",
    "maclaurin",
    "concavity",
    "gv-first",
    "gv-second",
];

struct TrialOutcome {
    rejected: usize,
    identity_error: f64,
    margins: [f64; 7],
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let mut a = ZERO;
    let shift = rng.gen_range(0.0..1.5);
    for i in 0..n {
        for j in 0..=i {
            let v = rng.gen_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
        a[i][i] += shift;
    }
    a
}

fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let mut m = ZERO;
    for row in m.iter_mut().take(n) {
        for v in row.iter_mut().take(n) {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
    let mut g = ZERO;
    for i in 0..n {
        for j in 0..n {
            g[i][j] = (0..n).map(|l| m[i][l] * m[j][l]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
        }
    }
    g
}

fn in_gamma2(n: usize, a: &Mat, g: &Mat) -> bool {
    let e = Spectrum::of_pencil(n, a, g).map(|s| s.elementary());
    e.is_some_and(|e| e[1] > CONE_MARGIN && e[2] > CONE_MARGIN)
}

fn sample_gamma2(rng: &mut ChaCha8Rng, n: usize, g: &Mat, rejected: &mut usize) -> Mat {
    loop {
        let a = random_symmetric(rng, n);
        if in_gamma2(n, &a, g) {
            return a;
        }
        *rejected += 1;
    }
}

fn sqrt_sigma2(n: usize, a: &Mat, g: &Mat) -> f64 {
    Spectrum::of_pencil(n, a, g).map_or(f64::NAN, |s| s.elementary()[2].max(0.0).sqrt())
}

fn pencil_min(n: usize, a: &Mat, g: &Mat) -> f64 {
    linalg::pencil_eigenvalues(n, a, g).and_then(|v| v.last().copied()).unwrap_or(f64::NAN)
}

fn run_trial(seed: u64, trial: usize, n: usize) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut rejected = 0;
    let g = random_metric(&mut rng, n);
    let a = sample_gamma2(&mut rng, n, &g, &mut rejected);
    let b = sample_gamma2(&mut rng, n, &g, &mut rejected);
    let rho: f64 = rng.gen_range(0.0..=1.0);
    let t: f64 = rng.gen_range(-3.0..=1.0);

    let s = linalg::symmetrize(n, &a, &g).expect("sampled metric is positive definite");
    let sq = to_square(n, &s);
    let e = matrix_elementary(&sq);
    let mut identity_error: f64 = 0.0;
    for k in 1..=n {
        let tk = newton_transform(&sq, k).expect("k in range");
        let rel = |lhs: f64, rhs: f64| (lhs - rhs).abs() / rhs.abs().max(1.0);
        identity_error = identity_error
            .max(rel(contract(&tk, &sq), k as f64 * e[k]))
            .max(rel(trace(&tk), (n - k + 1) as f64 * e[k - 1]));
    }

    let pair = newton_and_lt(&a, &g, n, 2, t).expect("valid dimension and k");
    let (newton_min, lt_min) = pair.min_eigenvalues();

    let maclaurin = e[1] - maclaurin_constant::<f64>(n, 2) * e[2].sqrt();

    let mut mix = ZERO;
    for i in 0..n {
        for j in 0..n {
            mix[i][j] = rho * a[i][j] + (1.0 - rho) * b[i][j];
        }
    }
    let concavity = sqrt_sigma2(n, &mix, &g) - rho * sqrt_sigma2(n, &a, &g) - (1.0 - rho) * sqrt_sigma2(n, &b, &g);

    let mut first = ZERO;
    let mut second = ZERO;
    let c = (n as f64 - 2.0) / n as f64;
    for i in 0..n {
        for j in 0..n {
            first[i][j] = -a[i][j] + e[1] * g[i][j];
            second[i][j] = a[i][j] + c * e[1] * g[i][j];
        }
    }

    TrialOutcome {
        rejected,
        identity_error,
        margins: [
            IDENTITY_TOLERANCE - identity_error,
            newton_min,
            lt_min,
            maclaurin + INEQUALITY_SLACK * e[1].max(1.0),
            concavity + INEQUALITY_SLACK,
            pencil_min(n, &first, &g),
            pencil_min(n, &second, &g),
        ],
    }
}

/// Seeded random checks of the algebraic facts about Γ₂⁺. Trial `i` draws
/// from its own ChaCha stream, so the report does not depend on scheduling.
pub fn cone_lemma_suite(seed: u64, trials: usize, n: usize) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if !(3..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("dimension {n} not in {{3, 4}}")));
    }
    let outcomes: Vec<TrialOutcome> = (0..trials).into_par_iter().map(|i| run_trial(seed, i, n)).collect();
    let mut checks: Vec<CheckSummary> = CHECKS
        .iter()
        .map(|name| CheckSummary { name: name.to_string(), evaluated: 0, violations: 0, worst_margin: f64::INFINITY })
        .collect();
    let mut violations = Vec::new();
    let mut rejected = 0;
    let mut max_identity_error: f64 = 0.0;
    for (trial, o) in outcomes.iter().enumerate() {
        rejected += o.rejected;
        max_identity_error = max_identity_error.max(o.identity_error);
        for (c, &m) in checks.iter_mut().zip(&o.margins) {
            c.evaluated += 1;
            c.worst_margin = c.worst_margin.min(m);
            if !(m > 0.0) {
                c.violations += 1;
                if violations.len() < MAX_RECORDED {
                    violations.push(Violation { trial, check: c.name.clone(), margin: m });
                }
            }
        }
    }
    Ok(SuiteReport { n, seed, trials, rejected, max_identity_error, checks, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    fn diag(v: &[f64]) -> Mat {
        let mut m = ZERO;
        for (i, x) in v.iter().enumerate() {
            m[i][i] = *x;
        }
        m
    }

    #[test]
    fn sigma_of_small_spectra() {
        let s = Spectrum::new(vec![q(1, 2); 4]);
        assert_eq!(sigma_k(&s, 2).unwrap(), q(3, 2));
        let s = Spectrum::new(vec![q(1, 2); 3]);
        assert_eq!(sigma_k(&s, 2).unwrap(), q(3, 4));
        assert_eq!(sigma_k(&Spectrum::new(vec![1.0, 1.0, 1.0]), 2).unwrap(), 3.0);
        assert!(sigma_k(&s, 0).is_err());
        assert!(sigma_k(&s, 4).is_err());
    }

    #[test]
    fn newton_on_diagonal() {
        let a: SquareMatrix<Q> =
            (0..3).map(|i| (0..3).map(|j| if i == j { q(i as i64 + 1, 1) } else { q(0, 1) }).collect()).collect();
        let t1 = newton_transform(&a, 2).unwrap();
        assert_eq!([t1[0][0], t1[1][1], t1[2][2]], [q(5, 1), q(4, 1), q(3, 1)]);
        assert_eq!(contract(&t1, &a), q(22, 1));
        assert_eq!(trace(&t1), q(12, 1));
    }

    #[test]
    fn lt_at_one_is_newton() {
        let g = diag(&[1.0, 1.0, 1.0]);
        let p = newton_and_lt(&diag(&[1.0, 2.0, 3.0]), &g, 3, 2, 1.0).unwrap();
        assert_eq!(p.lt, p.newton);
        assert_eq!([p.newton[0][0], p.newton[1][1], p.newton[2][2]], [5.0, 4.0, 3.0]);
    }

    #[test]
    fn maclaurin_constants() {
        assert!((maclaurin_constant::<f64>(3, 2) - 3f64.sqrt()).abs() < 1e-15);
        assert!((maclaurin_constant::<f64>(4, 2) - 4.0 / 6f64.sqrt()).abs() < 1e-15);
        let e = elementary(&[1.0f64, 2.0, 3.0]);
        assert!(e[1] >= maclaurin_constant::<f64>(3, 2) * e[2].sqrt());
    }

    #[test]
    fn suite_is_clean_and_reproducible() {
        let a = cone_lemma_suite(7, 200, 3).unwrap();
        assert!(a.passed(), "{:?}", a.violations);
        assert_eq!(a, cone_lemma_suite(7, 200, 3).unwrap());
        assert!(cone_lemma_suite(7, 0, 3).is_err());
    }
}
