//! The quadratic form `P^{4,3}` on radial Neumann fields, its spectrum, and the
//! minimization of
//! `II(u) = ⟨P^{4,3}u,u⟩ + 4∫Qu + 4∮Tu − κ_{P⁴} log ⨍e^{4u} − (4/3)κ_{P³} log ⨍_{∂M} e^{3u}`.
//!
//! Averages `⨍` make `II(0) = 0`. With the boundary coefficient 4 on `∮Tu`,
//! `II(u + c) = II(u)` exactly. First variation, for Neumann `v` on a totally
//! geodesic boundary:
//! `dII(v) = 2∫v(P⁴u + 2Q − 2Q̄e^{4u}) + 4∮v(P³u + T − T̄e^{3u})` with
//! `Q̄ = κ_{P⁴}/∫e^{4u}` and `T̄ = κ_{P³}/∮e^{3u}`; the bulk form pairs with
//! `P³` through a factor 2.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::integrate_volume;
use crate::catalog::CatalogId;
use crate::conformal::max_face_derivative;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::identities::Residual;
use crate::linalg;
use crate::operators::{Geometry, TOTALLY_GEODESIC_TOLERANCE};
use crate::radial::RadialModel;
use crate::stencil::{STENCIL_RADIUS, STENCIL_WIDTH};

pub const SPECTRUM_TOLERANCE: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const ROUNDOFF: f64 = 1e-11;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, g| m.max(g.abs()))
}

/// Dense `P` with `⟨P^{4,3}u, v⟩ ≈ uᵀPv` on radial samples.
#[derive(Clone, Debug)]
pub struct DiscreteP43 {
    pub matrix: DMatrix<f64>,
    pub weight: Vec<f64>,
    /// `max |P − Pᵀ| / max |P|` before symmetrization.
    pub asymmetry: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P43Spectrum {
    /// `max |(P·1)_i| / w_i`.
    pub kernel_residual: f64,
    /// Rayleigh quotient of constants.
    pub constant_eigenvalue: f64,
    pub min_eigenvalue: f64,
    pub second_eigenvalue: f64,
    /// Eigenvalues of `W^{-1/2} P W^{-1/2}`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl P43Spectrum {
    pub fn passed(&self) -> bool {
        self.min_eigenvalue >= -SPECTRUM_TOLERANCE
            && self.second_eigenvalue > 0.0
            && self.kernel_residual <= SPECTRUM_TOLERANCE
    }
}

/// Radial operators behind `II`.
#[derive(Clone, Debug)]
pub struct QtProblem {
    pub model: RadialModel,
    pub geometry: Geometry,
    /// `u ↦ Δu`, `u ↦ u'` as dense matrices (reflection folded in).
    lap: DMatrix<f64>,
    d1: DMatrix<f64>,
    lap_coef: Vec<(f64, f64)>,
    /// `(⅔R g − 2Ric)(e^0, e^0)` raised.
    beta: Vec<f64>,
    pub q: Vec<f64>,
    pub t_face: f64,
    pub kappa_p4: f64,
    pub kappa_p3: f64,
    pub volume: f64,
    pub area: f64,
    pub face: Vec<f64>,
}

fn raised00(n: usize, ginv: &linalg::Mat, m: &linalg::Mat) -> f64 {
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += ginv[0][a] * m[a][b] * ginv[b][0];
        }
    }
    s
}

impl QtProblem {
    pub fn new(id: &CatalogId, nodes: usize) -> Result<Self> {
        if id.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: id.dim() });
        }
        let (model, geometry) = RadialModel::with_geometry(id, nodes)?;
        let n = model.dim;
        let len = model.len();
        let mut lap = DMatrix::zeros(len, len);
        let mut d1 = DMatrix::zeros(len, len);
        let mut lap_coef = Vec::with_capacity(len);
        let mut beta = Vec::with_capacity(len);
        let (w1, w2) = (crate::stencil::centered_weights(1), crate::stencil::centered_weights(2));
        let h = model.h;
        for i in 0..len {
            let ginv = &model.ginv[i];
            let a = ginv[0][0];
            let b = -linalg::trace_with(n, ginv, &model.gamma0[i]);
            lap_coef.push((a, b));
            for p in 0..STENCIL_WIDTH {
                if p == STENCIL_RADIUS {
                    continue;
                }
                let j = model.reflect(i as isize + p as isize - STENCIL_RADIUS as isize);
                let c1 = w1[p] / h;
                let c2 = w2[p] / (h * h);
                d1[(i, j)] += c1;
                d1[(i, i)] -= c1;
                lap[(i, j)] += a * c2 + b * c1;
                lap[(i, i)] -= a * c2 + b * c1;
            }
            let g = &model.metric[i];
            let mut m = [[0.0; 4]; 4];
            for p in 0..n {
                for q in 0..n {
                    m[p][q] = 2.0 / 3.0 * model.scalar[i] * g[p][q] - 2.0 * model.ricci[i][p][q];
                }
            }
            beta.push(raised00(n, ginv, &m));
        }
        let qf = geometry.q_curvature()?;
        let q: Vec<f64> = model.line.iter().map(|&l| qf.values[l]).collect();
        let bb = geometry.boundary.as_ref();
        let (t_face, area) = match bb {
            Some(bb) => {
                let t = geometry.t_curvature()?;
                let det = linalg::inverse(n - 1, &bb.face_metric[0]).map(|(_, d)| d.max(0.0).sqrt()).unwrap_or(0.0);
                (t.values[0], det * 2.0 * std::f64::consts::PI.powi(2))
            }
            None => (0.0, 0.0),
        };
        let kappa_p4 = model.integrate(&q);
        let volume = model.integrate(&vec![1.0; len]);
        let face = model.face_weights();
        Ok(QtProblem {
            model,
            geometry,
            lap,
            d1,
            lap_coef,
            beta,
            q,
            t_face,
            kappa_p4,
            kappa_p3: t_face * area,
            volume,
            area,
            face,
        })
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }

    pub fn has_boundary(&self) -> bool {
        self.model.has_boundary
    }

    fn lap_apply(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|i| {
                let (d1, d2) = self.model.derivatives_at(u, i);
                let (a, b) = self.lap_coef[i];
                a * d2 + b * d1
            })
            .collect()
    }

    fn d1_apply(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len()).map(|i| self.model.derivatives_at(u, i).0).collect()
    }

    fn transpose_apply(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (m.transpose() * DVector::from_column_slice(v)).iter().copied().collect()
    }

    /// `P u`, with `P·const = 0` exactly.
    pub fn p43_apply(&self, u: &[f64]) -> Vec<f64> {
        let w = &self.model.weight;
        let l: Vec<f64> = self.lap_apply(u).iter().zip(w).map(|(a, w)| a * w).collect();
        let d: Vec<f64> = self.d1_apply(u).iter().zip(w).zip(&self.beta).map(|((a, w), b)| a * w * b).collect();
        let a = Self::transpose_apply(&self.lap, &l);
        let b = Self::transpose_apply(&self.d1, &d);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    pub fn p43_value(&self, u: &[f64], v: &[f64]) -> f64 {
        let w = &self.model.weight;
        let (lu, lv) = (self.lap_apply(u), self.lap_apply(v));
        let (du, dv) = (self.d1_apply(u), self.d1_apply(v));
        (0..u.len()).map(|i| w[i] * (lu[i] * lv[i] + self.beta[i] * du[i] * dv[i])).sum()
    }

    pub fn assemble_p43(&self) -> DiscreteP43 {
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(&self.model.weight));
        let wb = DMatrix::from_diagonal(&DVector::from_iterator(
            self.len(),
            self.model.weight.iter().zip(&self.beta).map(|(w, b)| w * b),
        ));
        let p = self.lap.transpose() * &w * &self.lap + self.d1.transpose() * wb * &self.d1;
        let scale = p.amax();
        let asymmetry = (&p - p.transpose()).amax() / scale.max(f64::MIN_POSITIVE);
        let matrix = (&p + p.transpose()) * 0.5;
        DiscreteP43 { matrix, weight: self.model.weight.clone(), asymmetry }
    }

    /// Spectrum of `W^{-1/2}PW^{-1/2}` with the constant mode deflated exactly.
    pub fn spectrum(&self) -> P43Spectrum {
        let len = self.len();
        let w = &self.model.weight;
        let p = self.assemble_p43().matrix;
        let ones = vec![1.0; len];
        let p1 = self.p43_apply(&ones);
        let kernel_residual = p1.iter().zip(w).fold(0.0, |m: f64, (v, w)| m.max((v / w).abs()));
        let constant_eigenvalue = p1.iter().sum::<f64>() / self.volume;
        let sq: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
        let s = DMatrix::from_fn(len, len, |i, j| p[(i, j)] / (sq[i] * sq[j]));
        // Householder reflector mapping the unit constant mode to e₀
        let norm = self.volume.sqrt();
        let mut v = DVector::from_iterator(len, sq.iter().map(|x| x / norm));
        v[0] -= 1.0;
        let vv = v.dot(&v);
        let hmat = DMatrix::<f64>::identity(len, len) - (&v * v.transpose()) * (2.0 / vv);
        let hs = &hmat * s * &hmat;
        let block = hs.view((1, 1), (len - 1, len - 1)).into_owned();
        let block = (&block + block.transpose()) * 0.5;
        let mut rest: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
        rest.sort_by(f64::total_cmp);
        let mut eigenvalues = rest.clone();
        eigenvalues.push(constant_eigenvalue);
        eigenvalues.sort_by(f64::total_cmp);
        P43Spectrum {
            kernel_residual,
            constant_eigenvalue,
            min_eigenvalue: eigenvalues[0],
            second_eigenvalue: eigenvalues[1],
            eigenvalues,
        }
    }

    fn face_value(&self, u: &[f64]) -> f64 {
        self.face.iter().zip(u).map(|(t, u)| t * u).sum()
    }

    /// `II(u)` and its nodal gradient `∂II/∂u_i`.
    pub fn value_and_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let w = &self.model.weight;
        let pu = self.p43_apply(u);
        let quad: f64 = pu.iter().zip(u).map(|(a, b)| a * b).sum();
        let e4: Vec<f64> = u.iter().map(|v| (4.0 * v).exp()).collect();
        let z = self.model.integrate(&e4);
        let lin = 4.0 * self.model.integrate(&self.q.iter().zip(u).map(|(q, u)| q * u).collect::<Vec<_>>());
        let mut value = quad + lin - self.kappa_p4 * (z / self.volume).ln();
        let mut grad: Vec<f64> =
            (0..u.len()).map(|i| 2.0 * pu[i] + 4.0 * w[i] * (self.q[i] - self.kappa_p4 * e4[i] / z)).collect();
        if self.has_boundary() {
            // u is constant on the face for radial fields
            let uf = self.face_value(u);
            let mean_e3 = (3.0 * uf).exp();
            value += 4.0 * self.kappa_p3 * uf - 4.0 / 3.0 * self.kappa_p3 * mean_e3.ln();
            for (g, t) in grad.iter_mut().zip(&self.face) {
                *g += 4.0 * self.kappa_p3 * t - 4.0 / 3.0 * self.kappa_p3 * 3.0 * t;
            }
        }
        (value, grad)
    }

    /// Nodal gradient divided by the weights: the `L²` representative.
    pub fn gradient_field(&self, grad: &[f64]) -> Vec<f64> {
        grad.iter().zip(&self.model.weight).map(|(g, w)| g / w).collect()
    }

    pub fn state(&self, u: &[f64]) -> FunctionalState {
        let mut v = u.to_vec();
        self.center(&mut v);
        let (value, grad) = self.value_and_gradient(&v);
        self.state_with(&v, value, &grad)
    }

    /// State at the normalized translate of the centered field `v`.
    fn state_with(&self, v: &[f64], value: f64, grad: &[f64]) -> FunctionalState {
        let gradient = self.gradient_field(grad);
        let shift = self.shift(v);
        let u: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let e4: Vec<f64> = u.iter().map(|x| (4.0 * x).exp()).collect();
        FunctionalState {
            theta: self.model.theta.clone(),
            centered: v.to_vec(),
            shift,
            u: u.clone(),
            value,
            grad_norm: sup(grad),
            gradient,
            mean: self.model.integrate(&u) / self.volume,
            boundary_mean: self.has_boundary().then(|| self.face_value(&u)),
            normalization_residual: (self.model.integrate(&e4) - 1.0).abs(),
            iterations: 0,
            trace: Vec::new(),
        }
    }

    /// Subtracts the mean.
    fn center(&self, u: &mut [f64]) {
        let m = self.model.integrate(u) / self.model.weight.iter().sum::<f64>();
        u.iter_mut().for_each(|v| *v -= m);
    }

    /// The constant `c` with `∫e^{4(u+c)} = 1`.
    pub fn shift(&self, u: &[f64]) -> f64 {
        let z = self.model.integrate(&u.iter().map(|v| (4.0 * v).exp()).collect::<Vec<_>>());
        -0.25 * z.ln()
    }

    /// Adds the constant that makes `∫e^{4u} = 1`.
    pub fn normalize(&self, u: &mut [f64]) {
        let c = self.shift(u);
        u.iter_mut().for_each(|v| *v += c);
    }

    /// Euler–Lagrange residuals of `u` through the strong operators on the full grid.
    pub fn el_residual(&self, u: &[f64]) -> Result<ElResidual> {
        let mut v = u.to_vec();
        self.center(&mut v);
        let shift = self.model.integrate(u) / self.volume;
        self.el_residual_split(&v, shift)
    }

    /// Residuals of a minimizer, using its centered part so that no large
    /// constant is rounded into fourth differences.
    pub fn el_residual_of(&self, state: &FunctionalState) -> Result<ElResidual> {
        self.el_residual_split(&state.centered, state.shift)
    }

    fn el_residual_split(&self, v: &[f64], shift: f64) -> Result<ElResidual> {
        let geo = &self.geometry;
        let vf = self.model.broadcast(v);
        let uf = vf.map(|x| x + shift);
        let p4 = geo.paneitz(&vf)?;
        let q = geo.q_curvature()?;
        let e4 = uf.map(|v| (4.0 * v).exp());
        let q_bar = integrate_volume(&q, &geo.g)? / integrate_volume(&e4, &geo.g)?;
        let interior = ScalarField {
            grid: uf.grid.clone(),
            values: (0..uf.values.len())
                .map(|l| p4.values[l] + 2.0 * q.values[l] - 2.0 * q_bar * e4.values[l])
                .collect(),
        };
        let (boundary, t_bar) = match &geo.boundary {
            Some(bb) => {
                let p3 = geo.chang_qing(&vf)?;
                let t = geo.t_curvature()?;
                let ub = bb.face.trace(&uf)?;
                let e3 = ub.map(|v| (3.0 * v).exp());
                let t_bar = bb.integrate(&t)? / bb.integrate(&e3)?;
                let vals = (0..t.values.len()).map(|b| p3.values[b] + t.values[b] - t_bar * e3.values[b]).collect();
                (Some(ScalarField { grid: bb.grid().clone(), values: vals }), t_bar)
            }
            None => (None, 0.0),
        };
        let neumann = if geo.boundary.is_some() { max_face_derivative(&vf)? } else { 0.0 };
        Ok(ElResidual {
            interior_max: interior.max_abs(),
            boundary_max: boundary.as_ref().map_or(0.0, |b| b.max_abs()),
            interior,
            boundary,
            neumann,
            q_bar,
            t_bar,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ElResidual {
    /// `P⁴u + 2Q − 2Q̄e^{4u}`.
    pub interior: ScalarField,
    /// `P³u + T − T̄e^{3u}`.
    pub boundary: Option<ScalarField>,
    pub neumann: f64,
    pub q_bar: f64,
    pub t_bar: f64,
    pub interior_max: f64,
    pub boundary_max: f64,
}

/// Bound on every component of [`ElResidual`] for an accepted minimizer.
pub const EL_TOLERANCE: f64 = 1e-5;

impl ElResidual {
    pub fn max(&self) -> f64 {
        self.interior_max.max(self.boundary_max).max(self.neumann)
    }

    pub fn passed(&self) -> bool {
        self.max() <= EL_TOLERANCE
    }

    pub fn summary(&self) -> ElSummary {
        ElSummary {
            interior_max: self.interior_max,
            boundary_max: self.boundary_max,
            neumann: self.neumann,
            q_bar: self.q_bar,
            t_bar: self.t_bar,
            passed: self.passed(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElSummary {
    pub interior_max: f64,
    pub boundary_max: f64,
    pub neumann: f64,
    pub q_bar: f64,
    pub t_bar: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerRecord {
    pub iter: usize,
    #[serde(rename = "II")]
    pub ii: f64,
    pub grad_norm: f64,
    pub normalization_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalState {
    pub theta: Vec<f64>,
    /// `u = shift + centered`, with `centered` of zero mean.
    pub u: Vec<f64>,
    pub centered: Vec<f64>,
    pub shift: f64,
    pub value: f64,
    /// `L²` gradient of `II`.
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub mean: f64,
    pub boundary_mean: Option<f64>,
    pub normalization_residual: f64,
    pub iterations: usize,
    pub trace: Vec<MinimizerRecord>,
}

impl FunctionalState {
    fn record(&self, iter: usize) -> MinimizerRecord {
        MinimizerRecord {
            iter,
            ii: self.value,
            grad_norm: self.grad_norm,
            normalization_residual: self.normalization_residual,
        }
    }

    pub fn trace_lines(&self) -> String {
        self.trace.iter().map(|r| crate::json::to_line(r) + "\n").collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizerConfig {
    pub nodes: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub memory: usize,
    /// Starting field `Σ_k c_k cos(2kθ)`.
    pub initial: Vec<f64>,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        MinimizerConfig { nodes: 128, tolerance: 1e-8, max_iterations: 200, memory: 8, initial: Vec::new() }
    }
}

impl MinimizerConfig {
    pub fn initial_field(&self, theta: f64) -> f64 {
        self.initial.iter().enumerate().map(|(k, c)| c * (2.0 * k as f64 * theta).cos()).sum()
    }
}

/// Limited-memory BFGS preconditioned by `2P + W`. Every reported iterate is
/// shifted so that `∫e^{4u} = 1`.
pub fn minimize_ii(problem: &QtProblem, cfg: &MinimizerConfig) -> Result<FunctionalState> {
    if !(cfg.tolerance > 0.0) || cfg.memory == 0 {
        return Err(Error::InvalidParameter("tolerance and memory must be positive".into()));
    }
    if problem.has_boundary() {
        let l = problem.geometry.boundary.as_ref().map_or(0.0, |b| b.max_second_fundamental());
        if l > TOTALLY_GEODESIC_TOLERANCE {
            return Err(Error::NotTotallyGeodesic { max_second_fundamental_form: l });
        }
    }
    let spec = problem.spectrum();
    if !spec.passed() {
        return Err(Error::SpectrumPrecondition(format!(
            "min eigenvalue {:e}, second {:e}, kernel residual {:e}",
            spec.min_eigenvalue, spec.second_eigenvalue, spec.kernel_residual
        )));
    }
    let p = problem.assemble_p43().matrix;
    let m = p * 2.0 + DMatrix::from_diagonal(&DVector::from_column_slice(&problem.model.weight));
    let chol = m.cholesky().ok_or(Error::SpectrumPrecondition("preconditioner is not positive definite".into()))?;
    let precondition = |g: &[f64]| -> Vec<f64> { chol.solve(&DVector::from_column_slice(g)).iter().copied().collect() };

    // II is translation invariant; iterating on the centered field keeps the
    // rounding of P applied to a large constant out of the gradient
    let mut u = problem.model.sample(|x| cfg.initial_field(x));
    problem.center(&mut u);
    let (mut value, mut grad) = problem.value_and_gradient(&u);
    let mut state = problem.state_with(&u, value, &grad);
    let mut trace = vec![state.record(0)];
    let mut pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for iter in 1..=cfg.max_iterations + 1 {
        if state.grad_norm <= cfg.tolerance {
            state.iterations = iter - 1;
            state.trace = trace;
            return Ok(state);
        }
        if iter > cfg.max_iterations {
            break;
        }
        // two-loop recursion
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let mut r = precondition(&q);
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            r.iter_mut().zip(s).for_each(|(ri, si)| *ri += (a - b) * si);
        }
        let mut dir: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = precondition(&grad).iter().map(|v| -v).collect();
            slope = dot(&grad, &dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (v, g) = problem.value_and_gradient(&trial);
            // below the noise floor of II the decrease is judged by the slope along `dir`
            let ok = if (step * slope).abs() <= ROUNDOFF * (1.0 + value.abs()) {
                dot(&g, &dir).abs() < 0.9 * slope.abs()
            } else {
                v <= value + ARMIJO * step * slope
            };
            if v.is_finite() && ok {
                accepted = Some((trial, v, g));
                break;
            }
            step *= 0.5;
        }
        let Some((mut un, vn, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = dir.iter().map(|d| step * d).collect();
        let y: Vec<f64> = gn.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        problem.center(&mut un);
        u = un;
        value = vn;
        grad = gn;
        state = problem.state_with(&u, value, &grad);
        trace.push(state.record(iter));
    }
    Err(Error::NotConverged { what: "II minimization", iterations: cfg.max_iterations, residual: state.grad_norm })
}

/// `|⟨P^{4,3}u,u⟩ − (4/3)∫|∇̄²u|² − (2/3)∫(Rg − Ric)(∇u,∇u)|` on the full grid,
/// relative to the sum of the magnitudes of the three integrals.
pub fn bochner_decomposition_check(geo: &Geometry, u: &ScalarField) -> Result<Residual> {
    if geo.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: geo.dim() });
    }
    if let Some(bb) = &geo.boundary {
        let l = bb.max_second_fundamental();
        if l > TOTALLY_GEODESIC_TOLERANCE {
            return Err(Error::NotTotallyGeodesic { max_second_fundamental_form: l });
        }
    }
    let n = 4;
    let lhs = geo.p43_form(u, u)?;
    let conn = &geo.curvature.connection;
    let ders = geo.derivatives(u)?;
    let lap = ders.laplacian(conn);
    let len = u.values.len();
    let (mut hess, mut ric) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for l in 0..len {
        let ginv = conn.ginv_at(l);
        let g = geo.g.at(l);
        let mut h = ders.hess(l);
        let lp = lap.values[l];
        for a in 0..n {
            for b in 0..n {
                h[a][b] -= 0.25 * lp * g[a][b];
            }
        }
        hess.push(4.0 / 3.0 * linalg::inner(n, &ginv, &h, &h));
        let du = ders.du(l);
        let mut up = [0.0; 4];
        for a in 0..n {
            for b in 0..n {
                up[a] += ginv[a][b] * du[b];
            }
        }
        let r = geo.curvature.scalar_at(l);
        let rc = geo.curvature.ricci_at(l);
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += (r * g[a][b] - rc[a][b]) * up[a] * up[b];
            }
        }
        ric.push(2.0 / 3.0 * s);
    }
    let field = |v: Vec<f64>| ScalarField { grid: u.grid.clone(), values: v };
    let h = integrate_volume(&field(hess), &geo.g)?;
    let r = integrate_volume(&field(ric), &geo.g)?;
    let max_abs = (lhs - h - r).abs();
    let scale = lhs.abs() + h.abs() + r.abs();
    Ok(Residual {
        name: "bochner-decomposition".into(),
        max_abs,
        scale,
        relative: if max_abs == 0.0 { 0.0 } else { max_abs / scale.max(f64::MIN_POSITIVE) },
    })
}
