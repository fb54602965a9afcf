//! Continuity method for the σ₂ Neumann problem on radial conformal factors.
//!
//! Along `t ∈ [δ, t₀]` solve `σ₂^{1/2}(g⁻¹A^t_u) − (√α/4)|W_g| = f e^{2u}` where
//! `A^t_u` is the modified Schouten tensor of `e^{−2u}g` and `f` is frozen at
//! `t = δ` so that `u ≡ 0` starts the path. Newton runs on the power form
//! `σ₂ − (f e^{2u} + (√α/4)|W|)² = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_rebuild, ConformalFactor};
use crate::curvature::schouten_t;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::operators::{Geometry, TOTALLY_GEODESIC_TOLERANCE};
use crate::radial::RadialModel;
use crate::stencil::{STENCIL_RADIUS, STENCIL_WIDTH};
use crate::symmetric::{newton_and_lt, ConeLevel, ConeReport, Spectrum};

pub const SEARCH_STEP: f64 = 0.1;
pub const SEARCH_RESOLUTION: f64 = 1e-3;
pub const SEARCH_FLOOR: f64 = -1e3;
pub const JACOBIAN_STEP: f64 = 1e-7;
const MAX_DAMPING: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dimension: usize,
    pub t0: f64,
    pub alpha: f64,
    pub nodes: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub dt: f64,
    pub min_step: f64,
    pub epsilon: f64,
    /// Path start; searched for when absent.
    pub delta: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dimension: 3,
            t0: 2.0 / 3.0,
            alpha: 0.0,
            nodes: 128,
            tolerance: 1e-10,
            max_iterations: 30,
            dt: 0.05,
            min_step: 1e-4,
            epsilon: 1e-8,
            delta: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let t_max = match self.dimension {
            3 => 2.0 / 3.0,
            4 => 1.0,
            n => return Err(Error::DimensionMismatch { expected: 4, found: n }),
        };
        if !(self.t0 <= t_max + 1e-12) {
            return bad(format!("t0 = {} exceeds {t_max} in dimension {}", self.t0, self.dimension));
        }
        if !(0.0..=1.0).contains(&self.alpha) || (self.dimension == 3 && self.alpha != 0.0) {
            return bad(format!("alpha = {} (must be 0 in dimension three, in [0, 1] otherwise)", self.alpha));
        }
        if !(self.tolerance > 0.0 && self.dt > 0.0 && self.min_step > 0.0 && self.epsilon > 0.0) {
            return bad("tolerances and steps must be positive".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if let Some(d) = self.delta {
            if !(d <= self.t0) {
                return bad(format!("delta = {d} above t0 = {}", self.t0));
            }
        }
        Ok(())
    }
}

/// Right-hand side `f`, frozen at `t = δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhsField {
    pub delta: f64,
    pub values: Vec<f64>,
}

/// `min_i min(λ_min(g⁻¹A^t), Λ⁺ quantity)` for the background metric.
fn start_margin(model: &RadialModel, t: f64, alpha: f64) -> (f64, usize) {
    let (mut worst, mut node) = (f64::INFINITY, 0);
    for i in 0..model.len() {
        let a = model.schouten_t(i, t);
        let m = match Spectrum::of_pencil(model.dim, &a, &model.metric[i]) {
            Some(s) => {
                let lmin = *s.values().last().unwrap_or(&f64::NAN);
                if model.dim == 4 {
                    let e = s.elementary();
                    lmin.min(e[2].max(0.0).sqrt() - 0.25 * alpha.sqrt() * model.weyl_norm[i])
                } else {
                    lmin
                }
            }
            None => f64::NAN,
        };
        if !(m >= worst) {
            worst = m;
            node = i;
        }
    }
    (worst, node)
}

fn rhs_at(model: &RadialModel, delta: f64, alpha: f64) -> RhsField {
    let values = (0..model.len())
        .map(|i| {
            let s2 = Spectrum::of_pencil(model.dim, &model.schouten_t(i, delta), &model.metric[i])
                .map(|s| s.elementary()[2])
                .unwrap_or(f64::NAN);
            s2.max(0.0).sqrt() - 0.25 * alpha.sqrt() * model.weyl_norm[i]
        })
        .collect();
    RhsField { delta, values }
}

/// Largest admissible `δ` found by stepping down from `t₀` and bisecting the
/// first bracket to `SEARCH_RESOLUTION`; `δ < t₀` always.
pub fn select_delta(model: &RadialModel, t0: f64, alpha: f64, epsilon: f64) -> Result<(f64, RhsField)> {
    let ok = |t: f64| start_margin(model, t, alpha).0 > epsilon;
    let mut above = t0;
    let mut above_ok = ok(t0);
    let mut t = t0 - SEARCH_STEP;
    while t >= SEARCH_FLOOR {
        if ok(t) {
            let mut lo = t;
            if !above_ok {
                let mut hi = above;
                while hi - lo > SEARCH_RESOLUTION {
                    let mid = 0.5 * (lo + hi);
                    if ok(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            return Ok((lo, rhs_at(model, lo, alpha)));
        }
        above = t;
        above_ok = false;
        t -= SEARCH_STEP;
    }
    Err(Error::NoAdmissibleDelta { floor: SEARCH_FLOOR })
}

/// Path start at a given `δ`, checked for admissibility.
pub fn rhs_for_delta(model: &RadialModel, delta: f64, alpha: f64, epsilon: f64) -> Result<RhsField> {
    let (m, node) = start_margin(model, delta, alpha);
    if !(m > epsilon) {
        return Err(Error::ConeViolation { node, margin: m });
    }
    Ok(rhs_at(model, delta, alpha))
}

/// Pointwise evaluation of both forms of the equation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// `σ₂^{1/2} − (√α/4)|W| − f e^{2u}`.
    pub residual: Vec<f64>,
    /// `σ₂ − (f e^{2u} + (√α/4)|W|)²`.
    pub power: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub grad: Vec<f64>,
    /// `min_i σ₂^{1/2} − (√α/4)|W|`.
    pub lambda_margin: f64,
}

impl Evaluation {
    pub fn sup(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn cone(&self) -> ConeReport {
        let level = |k: usize, vals: &dyn Fn(usize) -> f64| {
            let (mut worst, mut node) = (f64::INFINITY, 0);
            for i in 0..self.sigma1.len() {
                let v = vals(i);
                if !(v >= worst) {
                    worst = v;
                    node = i;
                }
            }
            ConeLevel { k, member: worst > 0.0, min_margin: worst, worst_node: node }
        };
        ConeReport {
            levels: vec![
                level(1, &|i| self.sigma1[i]),
                level(2, &|i| self.sigma1[i].min(self.sigma2[i])),
            ],
        }
    }
}

fn check_len(model: &RadialModel, u: &[f64], f: &RhsField) -> Result<()> {
    if u.len() != model.len() || f.values.len() != model.len() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Both residual forms; cone membership is not enforced.
pub fn evaluate(model: &RadialModel, u: &[f64], t: f64, f: &RhsField, alpha: f64) -> Result<Evaluation> {
    check_len(model, u, f)?;
    let n = model.len();
    let sa = 0.25 * alpha.sqrt();
    let mut ev = Evaluation {
        residual: Vec::with_capacity(n),
        power: Vec::with_capacity(n),
        sigma1: Vec::with_capacity(n),
        sigma2: Vec::with_capacity(n),
        grad: Vec::with_capacity(n),
        lambda_margin: f64::INFINITY,
    };
    for i in 0..n {
        let s = model.node_state(u, i, t);
        let w = sa * model.weyl_norm[i];
        let rhs = f.values[i] * (2.0 * u[i]).exp();
        let root = s.sigma2.max(0.0).sqrt();
        ev.residual.push(root - w - rhs);
        ev.power.push(s.sigma2 - (rhs + w) * (rhs + w));
        ev.sigma1.push(s.sigma1);
        ev.sigma2.push(s.sigma2);
        ev.grad.push(model.grad_norm(i, s.du));
        ev.lambda_margin = ev.lambda_margin.min(root - w);
    }
    if let Some(i) = ev.power.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node: i });
    }
    Ok(ev)
}

/// `σ₂^{1/2}(g⁻¹A^t_u) − (√α/4)|W| − f e^{2u}`; errors outside `Γ₂⁺`.
pub fn residual(model: &RadialModel, u: &[f64], t: f64, f: &RhsField, alpha: f64) -> Result<Vec<f64>> {
    let ev = evaluate(model, u, t, f, alpha)?;
    let top = ev.cone().top().clone();
    if !top.member {
        return Err(Error::ConeViolation { node: top.worst_node, margin: top.min_margin });
    }
    Ok(ev.residual)
}

/// Square matrix with entries `|i − j| ≤ STENCIL_RADIUS`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    pub n: usize,
    /// `rows[i][k]` is the entry at column `i + k − STENCIL_RADIUS`.
    pub rows: Vec<[f64; STENCIL_WIDTH]>,
}

impl BandedMatrix {
    pub fn zeros(n: usize) -> Self {
        BandedMatrix { n, rows: vec![[0.0; STENCIL_WIDTH]; n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let k = j as isize - i as isize + STENCIL_RADIUS as isize;
        if (0..STENCIL_WIDTH as isize).contains(&k) {
            self.rows[i][k as usize]
        } else {
            0.0
        }
    }

    fn columns(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.n;
        self.rows[i].iter().enumerate().filter_map(move |(k, &v)| {
            let j = i as isize + k as isize - STENCIL_RADIUS as isize;
            (j >= 0 && (j as usize) < n).then_some((j as usize, v))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.columns(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let x = self.to_dense().lu().solve(&DVector::from_column_slice(b))?;
        x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
    }
}

/// Jacobian of the power form by central differences, one column colour per
/// stencil slot. `σ₂` is quadratic in `u''`, so central differences carry no
/// truncation error from the derivative terms.
pub fn jacobian(model: &RadialModel, u: &[f64], t: f64, f: &RhsField, alpha: f64) -> Result<BandedMatrix> {
    let n = model.len();
    let mut m = BandedMatrix::zeros(n);
    let mut up = u.to_vec();
    let mut shifted = |colour: usize, s: f64| -> Result<Vec<f64>> {
        for j in (colour..n).step_by(STENCIL_WIDTH) {
            up[j] = u[j] + s;
        }
        let p = evaluate(model, &up, t, f, alpha)?.power;
        for j in (colour..n).step_by(STENCIL_WIDTH) {
            up[j] = u[j];
        }
        Ok(p)
    };
    for colour in 0..STENCIL_WIDTH {
        let plus = shifted(colour, JACOBIAN_STEP)?;
        let minus = shifted(colour, -JACOBIAN_STEP)?;
        for i in 0..n {
            // the unique column of this colour within the band of row i
            let lo = i.saturating_sub(STENCIL_RADIUS);
            let j = lo + (colour + STENCIL_WIDTH - lo % STENCIL_WIDTH) % STENCIL_WIDTH;
            if j < n && j <= i + STENCIL_RADIUS {
                m.rows[i][j + STENCIL_RADIUS - i] = (plus[i] - minus[i]) / (2.0 * JACOBIAN_STEP);
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct Linearization {
    pub matrix: BandedMatrix,
    /// Coefficient of `u''` recovered from the matrix on rows whose stencil
    /// stays inside the grid.
    pub leading: Vec<(usize, f64)>,
    /// `L^t(A^t_u)^{00}` at the same rows.
    pub explicit: Vec<f64>,
    /// `max |leading − explicit| / max |explicit|`.
    pub discrepancy: f64,
}

/// `g^{0a} L_ab g^{b0}` for `L` given in the `g`-orthonormal frame of `symmetrize`.
fn raised_00(n: usize, l_on: &Mat, g: &Mat) -> Option<f64> {
    let c = linalg::cholesky(n, g)?;
    // column 0 of C⁻¹, by forward substitution
    let mut x = [0.0; 4];
    for i in 0..n {
        let mut s = if i == 0 { 1.0 } else { 0.0 };
        for k in 0..i {
            s -= c[i][k] * x[k];
        }
        x[i] = s / c[i][i];
    }
    Some(crate::calculus::quad(n, l_on, &x))
}

pub fn linearize(model: &RadialModel, u: &[f64], t: f64, f: &RhsField, alpha: f64) -> Result<Linearization> {
    residual(model, u, t, f, alpha)?;
    let matrix = jacobian(model, u, t, f, alpha)?;
    let n = model.len();
    let mut leading = Vec::new();
    let mut explicit = Vec::new();
    for i in STENCIL_RADIUS..n.saturating_sub(STENCIL_RADIUS) {
        let a: f64 = matrix
            .columns(i)
            .map(|(j, v)| v * 0.5 * (model.theta[j] - model.theta[i]).powi(2))
            .sum();
        let s = model.node_state(u, i, t);
        let pair = newton_and_lt(&s.a, &model.metric[i], model.dim, 2, t)?;
        let l00 = raised_00(model.dim, &pair.lt, &model.metric[i])
            .ok_or(Error::NotPositiveDefinite { node: i, min_eigenvalue: f64::NAN })?;
        leading.push((i, a));
        explicit.push(l00);
    }
    let scale = explicit.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let diff = leading.iter().zip(&explicit).fold(0.0, |m: f64, ((_, a), b)| m.max((a - b).abs()));
    Ok(Linearization { matrix, leading, explicit, discrepancy: diff / scale.max(f64::MIN_POSITIVE) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub residual: f64,
    pub min_cone_margin: f64,
    pub max_u: f64,
    pub min_u: f64,
    pub max_grad_u: f64,
    #[serde(skip)]
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationState {
    pub t: f64,
    pub delta: f64,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub residual: f64,
    pub cone: ConeReport,
    /// Dimension four: `min σ₂^{1/2}(g⁻¹A^t_u) − (√α/4)|W|`.
    pub lambda_margin: Option<f64>,
    pub max_u: f64,
    pub min_u: f64,
    pub max_grad_u: f64,
    pub f: RhsField,
    pub trace: Vec<TraceRecord>,
}

impl ContinuationState {
    fn new(model: &RadialModel, t: f64, u: Vec<f64>, ev: &Evaluation, f: &RhsField, trace: Vec<TraceRecord>) -> Self {
        ContinuationState {
            t,
            delta: f.delta,
            theta: model.theta.clone(),
            residual: ev.sup(),
            cone: ev.cone(),
            lambda_margin: (model.dim == 4).then_some(ev.lambda_margin),
            max_u: u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_u: u.iter().copied().fold(f64::INFINITY, f64::min),
            max_grad_u: ev.grad.iter().copied().fold(0.0, f64::max),
            u,
            f: f.clone(),
            trace,
        }
    }

    pub fn min_margin(&self) -> f64 {
        let c = self.cone.top().min_margin;
        self.lambda_margin.map_or(c, |l| c.min(l))
    }

    fn record(&self, iterations: usize) -> TraceRecord {
        TraceRecord {
            t: self.t,
            residual: self.residual,
            min_cone_margin: self.min_margin(),
            max_u: self.max_u,
            min_u: self.min_u,
            max_grad_u: self.max_grad_u,
            iterations,
        }
    }

    /// One JSON object per accepted step.
    pub fn trace_lines(&self) -> String {
        self.trace.iter().map(|r| crate::json::to_line(r) + "\n").collect()
    }
}

fn power_sup(ev: &Evaluation) -> f64 {
    ev.power.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Damped Newton on the power form at fixed `t`. `None` when it fails.
fn newton(model: &RadialModel, u0: &[f64], t: f64, f: &RhsField, cfg: &SolverConfig) -> Option<(Vec<f64>, Evaluation, usize)> {
    let mut u = u0.to_vec();
    let mut ev = evaluate(model, &u, t, f, cfg.alpha).ok()?;
    for it in 0..=cfg.max_iterations {
        if !ev.cone().top().member {
            return None;
        }
        if ev.sup() <= cfg.tolerance {
            return Some((u, ev, it));
        }
        if it == cfg.max_iterations {
            break;
        }
        let j = jacobian(model, &u, t, f, cfg.alpha).ok()?;
        let rhs: Vec<f64> = ev.power.iter().map(|v| -v).collect();
        let du = j.solve(&rhs)?;
        let current = power_sup(&ev);
        let mut lambda = 1.0;
        let mut next = None;
        for _ in 0..MAX_DAMPING {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + lambda * d).collect();
            if let Ok(e) = evaluate(model, &trial, t, f, cfg.alpha) {
                if e.cone().top().member && power_sup(&e) < current {
                    next = Some((trial, e));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let (un, en) = next?;
        u = un;
        ev = en;
    }
    None
}

pub fn continuity_solve(model: &RadialModel, cfg: &SolverConfig) -> Result<ContinuationState> {
    cfg.validate()?;
    if model.dim != cfg.dimension {
        return Err(Error::DimensionMismatch { expected: cfg.dimension, found: model.dim });
    }
    let (delta, f) = match cfg.delta {
        Some(d) => (d, rhs_for_delta(model, d, cfg.alpha, cfg.epsilon)?),
        None => select_delta(model, cfg.t0, cfg.alpha, cfg.epsilon)?,
    };
    let u = vec![0.0; model.len()];
    let ev = evaluate(model, &u, delta, &f, cfg.alpha)?;
    let mut state = ContinuationState::new(model, delta, u, &ev, &f, Vec::new());
    state.trace.push(state.record(0));
    let mut dt = cfg.dt;
    while state.t < cfg.t0 {
        let t = (state.t + dt).min(cfg.t0);
        match newton(model, &state.u, t, &f, cfg) {
            Some((u, ev, iterations)) => {
                let trace = std::mem::take(&mut state.trace);
                state = ContinuationState::new(model, t, u, &ev, &f, trace);
                if !(state.min_margin() > cfg.epsilon) {
                    let top = state.cone.top();
                    let node = if top.min_margin <= cfg.epsilon { top.worst_node } else { 0 };
                    return Err(Error::ConeViolation { node, margin: state.min_margin() });
                }
                let rec = state.record(iterations);
                state.trace.push(rec);
            }
            None => {
                dt *= 0.5;
                if dt < cfg.min_step {
                    return Err(Error::StepUnderflow { last_t: state.t });
                }
            }
        }
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub min_margin: f64,
    pub worst_node: usize,
    pub satisfied: bool,
}

impl Inequality {
    fn from_values(name: &str, values: impl Iterator<Item = f64>) -> Self {
        let (mut worst, mut node) = (f64::INFINITY, 0);
        for (l, v) in values.enumerate() {
            if !(v >= worst) {
                worst = v;
                node = l;
            }
        }
        Inequality { name: name.to_string(), min_margin: worst, worst_node: node, satisfied: worst > 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConclusionReport {
    pub t0: f64,
    pub inequalities: Vec<Inequality>,
}

impl ConclusionReport {
    pub fn passed(&self) -> bool {
        self.inequalities.iter().all(|i| i.satisfied)
    }

    pub fn get(&self, name: &str) -> Option<&Inequality> {
        self.inequalities.iter().find(|i| i.name == name)
    }
}

/// Pointwise conclusions for `g̃ = e^{−2u}g` from its directly computed curvature.
pub fn conclusions(model: &RadialModel, state: &ContinuationState, alpha: f64) -> Result<ConclusionReport> {
    if state.u.len() != model.len() {
        return Err(Error::GridMismatch);
    }
    let n = model.dim;
    let t0 = state.t;
    let gt = conformal_rebuild(&model.g, &ConformalFactor::shrink(model.broadcast(&state.u)))?;
    let geo = Geometry::new(&gt)?;
    let curv = &geo.curvature;
    let len = model.grid.len();
    let pencil_min = |l: usize, lo: f64, hi: f64| -> f64 {
        // λ_min of lo·Ric + hi·R g̃ against g̃
        let g = gt.at(l);
        let ric = curv.ricci_at(l);
        let r = curv.scalar_at(l);
        let mut m = [[0.0; 4]; 4];
        for a in 0..n {
            for b in 0..n {
                m[a][b] = lo * ric[a][b] + hi * r * g[a][b];
            }
        }
        linalg::pencil_eigenvalues(n, &m, &g).and_then(|v| v.last().copied()).unwrap_or(f64::NAN)
    };
    let sigma2 = |l: usize, bg: bool| -> f64 {
        let g = gt.at(l);
        let a = schouten_t(n, t0, &curv.ricci_at(l), curv.scalar_at(l), &g);
        let metric = if bg { model.g.at(l) } else { g };
        Spectrum::of_pencil(n, &a, &metric).map(|s| s.elementary()[2]).unwrap_or(f64::NAN)
    };
    let mut inequalities = Vec::new();
    if n == 3 {
        inequalities.push(Inequality::from_values("ricci-lower", (0..len).map(|l| pencil_min(l, 6.0, -(3.0 * t0 - 2.0)))));
        inequalities.push(Inequality::from_values("ricci-upper", (0..len).map(|l| pencil_min(l, -6.0, 3.0 * (2.0 - t0)))));
        inequalities.push(Inequality::from_values("sigma2", (0..len).map(|l| sigma2(l, true))));
    } else {
        inequalities.push(Inequality::from_values("ricci-lower", (0..len).map(|l| pencil_min(l, 2.0, -(t0 - 1.0)))));
        inequalities.push(Inequality::from_values("ricci-upper", (0..len).map(|l| pencil_min(l, -2.0, 2.0 - t0))));
        inequalities.push(Inequality::from_values("scalar", (0..len).map(|l| curv.scalar_at(l))));
        inequalities.push(Inequality::from_values(
            "sigma2-weyl",
            (0..len).map(|l| sigma2(l, false) - alpha / 16.0 * curv.norms_at(l).0),
        ));
    }
    if let Some(bb) = &geo.boundary {
        let h = &bb.mean_curvature.values;
        inequalities.push(Inequality::from_values("mean-curvature", h.iter().map(|v| TOTALLY_GEODESIC_TOLERANCE - v.abs())));
        if n == 3 {
            let lf = &bb.second_fundamental;
            let d = lf.grid.dim();
            let vals = (0..lf.grid.len()).map(|b| {
                let m = lf.at(b);
                let max = m[..d].iter().flat_map(|row| row[..d].iter()).fold(0.0f64, |a, v| a.max(v.abs()));
                TOTALLY_GEODESIC_TOLERANCE - max
            });
            inequalities.push(Inequality::from_values("second-fundamental", vals));
        }
    }
    Ok(ConclusionReport { t0, inequalities })
}

/// [`conclusions`], failing on the first violated inequality.
pub fn verify_conclusions(model: &RadialModel, state: &ContinuationState, alpha: f64) -> Result<ConclusionReport> {
    let report = conclusions(model, state, alpha)?;
    if let Some(bad) = report.inequalities.iter().find(|i| !i.satisfied) {
        return Err(Error::InequalityViolated { name: bad.name.clone(), node: bad.worst_node, margin: bad.min_margin });
    }
    Ok(report)
}
