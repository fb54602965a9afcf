//! Integral and pointwise pinching conditions with signed margins.

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::calculus::integrate_volume;
use crate::curvature::CurvatureBundle;
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField};
use crate::operators::Geometry;

/// One condition. `satisfied` is exactly `margin > 0`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

impl Condition {
    fn new(name: &str, lhs: f64, rhs: f64, margin: f64) -> Self {
        Condition { name: name.to_string(), lhs, rhs, margin, satisfied: margin > 0.0 }
    }

    /// `lhs < rhs`.
    fn below(name: &str, lhs: f64, rhs: f64) -> Self {
        Condition::new(name, lhs, rhs, rhs - lhs)
    }

    /// `lhs > rhs`.
    fn above(name: &str, lhs: f64, rhs: f64) -> Self {
        Condition::new(name, lhs, rhs, lhs - rhs)
    }
}

/// A condition that could not be evaluated.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditionError {
    pub name: String,
    pub error: String,
}

/// Serializes as one array: the conditions, then the error records.
#[derive(Clone, Debug, PartialEq)]
pub struct PinchReport {
    pub conditions: Vec<Condition>,
    pub errors: Vec<ConditionError>,
    pub yamabe: f64,
    /// True when `yamabe` is the quotient of `g` itself, an upper bound for
    /// the invariant rather than the invariant.
    pub yamabe_is_proxy: bool,
}

impl PinchReport {
    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

impl Serialize for PinchReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.conditions.len() + self.errors.len()))?;
        for c in &self.conditions {
            seq.serialize_element(c)?;
        }
        for e in &self.errors {
            seq.serialize_element(e)?;
        }
        seq.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinchOptions {
    /// Yamabe invariant; the quotient of `g` when absent.
    pub yamabe: Option<f64>,
    /// Path parameter `t` (`t₀` in dimension three).
    pub t: f64,
    pub alpha: f64,
    /// Constant multiplying `(7/10 − t₀)Y²` in dimension three; without it
    /// the two terms are reported separately.
    pub constant_c: Option<f64>,
}

impl Default for PinchOptions {
    fn default() -> Self {
        PinchOptions { yamabe: None, t: 1.0, alpha: 1.0, constant_c: None }
    }
}

/// `WP = (|W|² + 2|E|²)/R²` and its maximum.
pub fn margerin_wp(g: &MetricField) -> Result<(ScalarField, f64)> {
    margerin_wp_of(&crate::curvature::compute_curvature(g)?)
}

pub fn margerin_wp_of(curv: &CurvatureBundle) -> Result<(ScalarField, f64)> {
    let len = curv.grid().len();
    let (mut worst, mut rmin) = (0, f64::INFINITY);
    for l in 0..len {
        let r = curv.scalar_at(l);
        if r < rmin {
            rmin = r;
            worst = l;
        }
    }
    if !(rmin > 0.0) {
        return Err(Error::NonPositiveScalarCurvature { node: worst, value: rmin });
    }
    let values: Vec<f64> = (0..len)
        .map(|l| {
            let (w2, e2, _) = curv.norms_at(l);
            let r = curv.scalar_at(l);
            (w2 + 2.0 * e2) / (r * r)
        })
        .collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((ScalarField { grid: curv.grid().clone(), values }, max))
}

pub fn diagnose(g: &MetricField, opts: &PinchOptions) -> Result<PinchReport> {
    diagnose_geometry(&Geometry::new(g)?, opts)
}

pub fn diagnose_geometry(geo: &Geometry, opts: &PinchOptions) -> Result<PinchReport> {
    if !(0.0..=1.0).contains(&opts.alpha) {
        return Err(Error::InvalidParameter(format!("alpha = {} outside [0, 1]", opts.alpha)));
    }
    let n = geo.dim();
    let g = &geo.g;
    let curv = &geo.curvature;
    let grid = g.grid();
    let len = grid.len();
    let integrate = |f: &dyn Fn(usize) -> f64| {
        integrate_volume(&ScalarField { grid: grid.clone(), values: (0..len).map(f).collect() }, g)
    };
    let inv = geo.invariants(0)?;
    let (yamabe, yamabe_is_proxy) = match opts.yamabe {
        Some(y) => (y, false),
        None => (inv.yamabe_quotient, true),
    };
    let y2 = yamabe * yamabe;
    let t = opts.t;
    let mut conditions = Vec::new();
    let mut errors = Vec::new();
    match margerin_wp_of(curv) {
        Ok((_, max)) => conditions.push(Condition::below("margerin-wp", max, 1.0 / 6.0)),
        Err(e) => errors.push(ConditionError { name: "margerin-wp".into(), error: e.to_string() }),
    }
    match n {
        4 => {
            let cgy = integrate(&|l| {
                let (w2, e2, _) = curv.norms_at(l);
                let r = curv.scalar_at(l);
                w2 + 2.0 * e2 - r * r / 6.0
            })?;
            let w8 = integrate(&|l| curv.norms_at(l).0)? / 8.0;
            let kappa = inv.kappa_total.expect("dimension four");
            conditions.push(Condition::below("cgy-integral", cgy, 0.0));
            conditions.push(Condition::above("cgy-kappa", kappa, w8));
            conditions.push(Condition::above("kappa-weyl", kappa, w8));
            conditions.push(Condition::above("kappa-yamabe", kappa + y2 / 6.0, 0.0));
            // ½κ − (α/16)∫|W|² + (1−t)(2−t)Y²/24
            let mu = 0.5 * kappa - 0.5 * opts.alpha * w8 + (1.0 - t) * (2.0 - t) * y2 / 24.0;
            conditions.push(Condition::above("mu-t", mu, 0.0));
        }
        3 => {
            let ric2 = integrate(&|l| curv.norms_at(l).2)?;
            let r2 = integrate(&|l| curv.scalar_at(l).powi(2))?;
            conditions.push(Condition::below("catino-djadli", ric2, 0.375 * r2));
            let s2 = integrate_volume(&geo.sigma2()?, g)?;
            let ty = (0.7 - t) * y2;
            match opts.constant_c {
                Some(c) => conditions.push(Condition::above("sigma2-yamabe", s2 + c * ty, 0.0)),
                None => {
                    conditions.push(Condition::above("sigma2-integral", s2, 0.0));
                    conditions.push(Condition::above("yamabe-gap", ty, 0.0));
                }
            }
        }
        _ => return Err(Error::DimensionMismatch { expected: 4, found: n }),
    }
    Ok(PinchReport { conditions, errors, yamabe, yamabe_is_proxy })
}
