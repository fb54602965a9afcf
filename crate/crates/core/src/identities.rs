//! Dual-path checks of the conformal transformation laws and of the integral
//! identities used for the σ₂ equation.
//!
//! Each check evaluates one side through the curvature of a rebuilt metric and
//! the other through derivatives of the conformal factor on the original one.

use serde::{Deserialize, Serialize};

use crate::calculus::{integrate_volume, quad};
use crate::conformal::{conformal_rebuild, max_face_derivative, Convention, ConformalFactor};
use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField};
use crate::linalg;
use crate::operators::Geometry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub max_abs: f64,
    pub scale: f64,
    /// `max_abs / max(scale, 1)`.
    pub relative: f64,
}

impl Residual {
    fn new(name: &str, lhs: &[f64], rhs: &[f64]) -> Self {
        let max_abs = lhs.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = lhs.iter().chain(rhs).map(|v| v.abs()).fold(0.0, f64::max);
        Residual { name: name.to_string(), max_abs, scale, relative: max_abs / scale.max(1.0) }
    }

    fn scalar(name: &str, lhs: f64, rhs: f64) -> Self {
        Residual::new(name, &[lhs], &[rhs])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residuals: Vec<Residual>,
}

impl ResidualReport {
    pub fn max_relative(&self) -> f64 {
        self.residuals.iter().map(|r| r.relative).fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

/// The four transformation laws of `(P⁴, Q)` and `(P³, T)` under `g_u = e^{2u}g`,
/// applied to `φ`. The boundary laws are skipped on closed charts.
pub fn conformal_laws_check(g: &MetricField, w: &ConformalFactor, phi: &ScalarField) -> Result<ResidualReport> {
    if w.convention != Convention::Expand {
        return Err(Error::InvalidParameter("conformal laws are stated for the expand convention".into()));
    }
    same_grid(g.grid(), &phi.grid)?;
    let u = w.expand_exponent();
    let geo = Geometry::new(g)?;
    let rebuilt = Geometry::new(&conformal_rebuild(g, w)?)?;
    let e = |k: f64| u.values.iter().map(|v| (k * v).exp()).collect::<Vec<_>>();

    let p4 = geo.paneitz(phi)?;
    let p4t = rebuilt.paneitz(phi)?;
    let e4m = e(-4.0);
    let rhs1: Vec<f64> = p4.values.iter().zip(&e4m).map(|(p, s)| p * s).collect();
    let mut residuals = vec![Residual::new("paneitz-covariance", &p4t.values, &rhs1)];

    let pu = geo.paneitz(&u)?;
    let q = geo.q_curvature()?;
    let qt = rebuilt.q_curvature()?;
    let e4 = e(4.0);
    let lhs2: Vec<f64> = pu.values.iter().zip(&q.values).map(|(p, q)| p + 2.0 * q).collect();
    let rhs2: Vec<f64> = qt.values.iter().zip(&e4).map(|(q, s)| 2.0 * q * s).collect();
    residuals.push(Residual::new("q-law", &lhs2, &rhs2));

    if let Some(bb) = &geo.boundary {
        let ub = bb.face.trace(&u)?;
        let p3 = geo.chang_qing(phi)?;
        let p3t = rebuilt.chang_qing(phi)?;
        let rhs3: Vec<f64> = p3.values.iter().zip(&ub.values).map(|(p, u)| p * (-3.0 * u).exp()).collect();
        residuals.push(Residual::new("chang-qing-covariance", &p3t.values, &rhs3));

        let p3u = geo.chang_qing(&u)?;
        let t = geo.t_curvature()?;
        let tt = rebuilt.t_curvature()?;
        let lhs4: Vec<f64> = p3u.values.iter().zip(&t.values).map(|(p, t)| p + t).collect();
        let rhs4: Vec<f64> = tt.values.iter().zip(&ub.values).map(|(t, u)| t * (3.0 * u).exp()).collect();
        residuals.push(Residual::new("t-law", &lhs4, &rhs4));
    }
    Ok(ResidualReport { residuals })
}

/// Sides of the integral transformation of `∫σ₂` under `g̃ = e^{−2u}g` in
/// dimension three.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    /// `∫ σ₂(g̃⁻¹Ã) e^{−4u} dV_g` from the curvature of `g̃`.
    pub lhs: f64,
    pub interior: f64,
    pub boundary: f64,
    /// Interior plus boundary integrals.
    pub general: Residual,
    /// Interior integrals alone, valid for totally geodesic boundaries and Neumann `u`.
    pub specialized: Residual,
}

pub fn lemma_change_check(g: &MetricField, u: &ScalarField) -> Result<ChangeReport> {
    if g.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: g.dim() });
    }
    same_grid(g.grid(), &u.grid)?;
    let n = 3;
    let geo = Geometry::new(g)?;
    let tilde = Geometry::new(&conformal_rebuild(g, &ConformalFactor::shrink(u.clone()))?)?;
    let s2t = tilde.sigma2()?;
    let lhs_field = s2t.zip(u, |s, u| s * (-4.0 * u).exp())?;
    let lhs = integrate_volume(&lhs_field, g)?;

    let conn = &geo.curvature.connection;
    let ders = geo.derivatives(u)?;
    let lap = ders.laplacian(conn);
    let grad2 = ders.grad_norm2(conn);
    let s2 = geo.sigma2()?;
    let values: Vec<f64> = (0..u.values.len())
        .map(|l| {
            let ginv = conn.ginv_at(l);
            let mut up = [0.0; 4];
            let du = ders.du(l);
            for a in 0..n {
                for b in 0..n {
                    up[a] += ginv[a][b] * du[b];
                }
            }
            let a_uu = quad(n, &geo.curvature.schouten_at(l), &up);
            let q = grad2.values[l];
            s2.values[l] + geo.curvature.scalar_at(l) * q / 8.0 - q * q / 4.0 + 0.5 * lap.values[l] * q - 0.5 * a_uu
        })
        .collect();
    let interior = integrate_volume(&ScalarField { grid: u.grid.clone(), values }, g)?;

    let boundary = match &geo.boundary {
        None => 0.0,
        Some(bb) => {
            // inward normal
            let dn = bb.normal_derivative(u)?;
            let dn_grad2 = bb.normal_derivative(&grad2)?;
            let rb = bb.face.trace(&geo.curvature.scalar())?;
            let lb = bb.face.trace(&lap)?;
            let gb = bb.face.trace(&grad2)?;
            let grads = bb.face.gradient(u)?;
            let vals = (0..bb.face.len())
                .map(|b| {
                    let a = bb.face.value_mat(n, b, &|l| geo.curvature.schouten_at(l));
                    let ginv = &bb.face_inverse[b];
                    let nu = &bb.normal[b];
                    let mut a_nu_du = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                a_nu_du += nu[i] * a[i][j] * ginv[j][k] * grads[b][k];
                            }
                        }
                    }
                    -0.25 * dn.values[b] * (rb.values[b] + 2.0 * lb.values[b] - 2.0 * gb.values[b])
                        + a_nu_du
                        + 0.25 * dn_grad2.values[b]
                })
                .collect();
            bb.integrate(&ScalarField { grid: bb.grid().clone(), values: vals })?
        }
    };
    Ok(ChangeReport {
        lhs,
        interior,
        boundary,
        general: Residual::scalar("change-general", lhs, interior + boundary),
        specialized: Residual::scalar("change-specialized", lhs, interior),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryIdentityReport {
    /// `max |∂_ν|∇u|²|` on the boundary.
    pub normal_gradient_norm: f64,
    /// `max |A¹(ν, ∇u)|` on the boundary.
    pub schouten_mixed: f64,
    /// `½∮∂_ν|∇u|² = ∫ |∇²u|² − (Δu)² + Ric(∇u,∇u) + ∮ ∂_νu Δu`, outward `ν`.
    pub bochner: Residual,
}

pub fn boundary_identities(g: &MetricField, u: &ScalarField) -> Result<BoundaryIdentityReport> {
    same_grid(g.grid(), &u.grid)?;
    let geo = Geometry::new(g)?;
    let bb = geo.boundary.as_ref().ok_or(Error::NoBoundary)?;
    let l = bb.max_second_fundamental();
    if l > crate::operators::TOTALLY_GEODESIC_TOLERANCE {
        return Err(Error::NotTotallyGeodesic { max_second_fundamental_form: l });
    }
    let d = max_face_derivative(u)?;
    if d > crate::operators::FORM_NEUMANN_TOLERANCE {
        return Err(Error::NeumannViolation { max_normal_derivative: d });
    }
    let n = g.dim();
    let conn = &geo.curvature.connection;
    let ders = geo.derivatives(u)?;
    let lap = ders.laplacian(conn);
    let grad2 = ders.grad_norm2(conn);
    let dn_grad2 = bb.normal_derivative(&grad2)?;
    let grads = bb.face.gradient(u)?;
    let schouten_mixed = (0..bb.face.len())
        .map(|b| {
            let a = bb.face.value_mat(n, b, &|l| geo.curvature.schouten_at(l));
            let ginv = &bb.face_inverse[b];
            let nu = &bb.normal[b];
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        s += nu[i] * a[i][j] * ginv[j][k] * grads[b][k];
                    }
                }
            }
            s.abs()
        })
        .fold(0.0, f64::max);

    let mut scale_vals = Vec::with_capacity(u.values.len());
    let values: Vec<f64> = (0..u.values.len())
        .map(|l| {
            let ginv = conn.ginv_at(l);
            let h = ders.hess(l);
            let h2 = linalg::inner(n, &ginv, &h, &h);
            let mut up = [0.0; 4];
            let du = ders.du(l);
            for a in 0..n {
                for b in 0..n {
                    up[a] += ginv[a][b] * du[b];
                }
            }
            let ric = quad(n, &geo.curvature.ricci_at(l), &up);
            let lp = lap.values[l];
            scale_vals.push(h2 + lp * lp + ric.abs());
            h2 - lp * lp + ric
        })
        .collect();
    let interior = integrate_volume(&ScalarField { grid: u.grid.clone(), values }, g)?;
    let scale = integrate_volume(&ScalarField { grid: u.grid.clone(), values: scale_vals }, g)?;
    let dn = bb.normal_derivative(u)?;
    let lb = bb.face.trace(&lap)?;
    let flux = bb.integrate(&dn.zip(&lb, |d, l| -d * l)?)?;
    let lhs = -0.5 * bb.integrate(&dn_grad2)?;
    let rhs = interior + flux;
    let max_abs = (lhs - rhs).abs();
    let bochner = Residual {
        name: "bochner".into(),
        max_abs,
        scale,
        relative: if max_abs == 0.0 { 0.0 } else { max_abs / scale.max(f64::MIN_POSITIVE) },
    };
    Ok(BoundaryIdentityReport { normal_gradient_norm: dn_grad2.max_abs(), schouten_mixed, bochner })
}
