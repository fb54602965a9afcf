//! Q- and T-curvature, the fourth-order interior operator `P⁴`, its boundary
//! companion `P³`, the quadratic form of the pair, and global invariants.
//!
//! `Δ` is the trace of the Hessian. With this sign
//! `P⁴φ = Δ²φ − div((⅔R g − 2Ric) dφ)`, which is the operator whose
//! quadratic form is `∫ ΔuΔv + ⅔R⟨∇u,∇v⟩ − 2Ric(∇u,∇v)` up to boundary terms.
//! Boundary normal derivatives use the inward unit normal.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryBundle;
use crate::calculus::{divergence, integrate_volume, laplacian, ScalarDerivatives};
use crate::curvature::{compute_curvature, CurvatureBundle};
use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField};
use crate::grid::FaceMode;
use crate::linalg::{self, Mat};
use crate::symmetric::node_elementary;

/// Largest `|L|` for which the boundary is treated as totally geodesic.
pub const TOTALLY_GEODESIC_TOLERANCE: f64 = 1e-6;
/// Largest normal derivative accepted by the quadratic form.
pub const FORM_NEUMANN_TOLERANCE: f64 = 1e-6;

/// Curvature of one metric, with its boundary quantities when it has a boundary.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub g: MetricField,
    pub curvature: CurvatureBundle,
    pub boundary: Option<BoundaryBundle>,
}

#[derive(Clone, Debug)]
pub struct QTBundle {
    pub q: ScalarField,
    /// On the boundary grid.
    pub t: Option<ScalarField>,
    pub p4: Option<ScalarField>,
    /// On the boundary grid.
    pub p3: Option<ScalarField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub kappa_p4: Option<f64>,
    pub kappa_p3: Option<f64>,
    pub kappa_total: Option<f64>,
    pub gbc_residual: Option<f64>,
    pub yamabe_quotient: f64,
    pub sigma2_kappa_residual: Option<f64>,
    #[serde(skip)]
    pub euler_characteristic: i64,
}

fn raise(n: usize, ginv: &Mat, d: &[f64]) -> [f64; 4] {
    let mut v = [0.0; 4];
    for a in 0..n {
        for b in 0..n {
            v[a] += ginv[a][b] * d[b];
        }
    }
    v
}

fn field(grid: &std::sync::Arc<crate::grid::ChartGrid>, values: Vec<f64>) -> ScalarField {
    ScalarField { grid: grid.clone(), values }
}

impl Geometry {
    pub fn new(g: &MetricField) -> Result<Self> {
        let curvature = compute_curvature(g)?;
        let boundary = match g.grid().boundary_axis() {
            Some(_) => Some(BoundaryBundle::new(&curvature, g)?),
            None => None,
        };
        Ok(Geometry { g: g.clone(), curvature, boundary })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    fn require_four(&self) -> Result<()> {
        if self.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: self.dim() });
        }
        Ok(())
    }

    fn bundle(&self) -> Result<&BoundaryBundle> {
        self.boundary.as_ref().ok_or(Error::NoBoundary)
    }

    fn require_totally_geodesic(&self) -> Result<&BoundaryBundle> {
        let bb = self.bundle()?;
        let l = bb.max_second_fundamental();
        if l > TOTALLY_GEODESIC_TOLERANCE {
            return Err(Error::NotTotallyGeodesic { max_second_fundamental_form: l });
        }
        Ok(bb)
    }

    pub fn derivatives(&self, u: &ScalarField) -> Result<ScalarDerivatives> {
        ScalarDerivatives::new(&self.curvature.connection, u, FaceMode::OneSided)
    }

    pub fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        laplacian(&self.curvature.connection, u, FaceMode::OneSided)
    }

    /// `Q = −(1/12)(ΔR − R² + 3|Ric|²)`.
    pub fn q_curvature(&self) -> Result<ScalarField> {
        let r = self.curvature.scalar();
        let lap = self.laplacian(&r)?;
        let ric2 = self.curvature.ricci_norm2();
        let values = (0..r.values.len())
            .map(|l| -(lap.values[l] - r.values[l] * r.values[l] + 3.0 * ric2.values[l]) / 12.0)
            .collect();
        Ok(field(&r.grid, values))
    }

    /// `σ₂(g⁻¹A¹)` at every node.
    pub fn sigma2(&self) -> Result<ScalarField> {
        let e = node_elementary(&self.curvature.schouten(), &self.g)?;
        Ok(field(self.g.grid(), e.iter().map(|e| e[2]).collect()))
    }

    pub fn paneitz(&self, phi: &ScalarField) -> Result<ScalarField> {
        self.require_four()?;
        same_grid(self.g.grid(), &phi.grid)?;
        let n = 4;
        let conn = &self.curvature.connection;
        let ders = self.derivatives(phi)?;
        let lap = ders.laplacian(conn);
        let bilap = self.laplacian(&lap)?;
        let len = phi.values.len();
        let mut v = vec![0.0; len * n];
        for l in 0..len {
            let ginv = conn.ginv_at(l);
            let ric = self.curvature.ricci_at(l);
            let r = self.curvature.scalar_at(l);
            let up = raise(n, &ginv, &ders.du(l));
            // (⅔R g − 2Ric)(∇φ, ·) raised
            let gm = self.g.at(l);
            let mut low = [0.0; 4];
            for a in 0..n {
                for b in 0..n {
                    low[a] += (2.0 / 3.0 * r * gm[a][b] - 2.0 * ric[a][b]) * up[b];
                }
            }
            v[l * n..(l + 1) * n].copy_from_slice(&raise(n, &ginv, &low)[..n]);
        }
        let div = divergence(conn, &v, FaceMode::OneSided)?;
        Ok(field(&phi.grid, (0..len).map(|l| bilap.values[l] - div.values[l]).collect()))
    }

    /// `T = −(1/12)∂_νR + ½RH − ⟨G,L⟩ + 3H³ − ⅓tr L³ + Δ̂H` on the boundary grid.
    pub fn t_curvature(&self) -> Result<ScalarField> {
        self.require_four()?;
        let bb = self.bundle()?;
        let r = self.curvature.scalar();
        let dr = bb.normal_derivative(&r)?;
        let rb = bb.face.trace(&r)?;
        let h = &bb.mean_curvature;
        let lap_h = laplacian(&bb.connection, h, FaceMode::OneSided)?;
        let m = 3;
        let values = (0..bb.face.len())
            .map(|b| {
                let hinv = bb.connection.ginv_at(b);
                let s = linalg::mul(m, &hinv, &bb.second_fundamental.at(b));
                let tr3 = linalg::trace(m, &linalg::mul(m, &linalg::mul(m, &s, &s), &s));
                let hb = h.values[b];
                -dr.values[b] / 12.0 + 0.5 * rb.values[b] * hb - bb.gl.values[b] + 3.0 * hb.powi(3) - tr3 / 3.0
                    + lap_h.values[b]
            })
            .collect();
        Ok(field(bb.grid(), values))
    }

    /// `P³φ = ½∂_νΔφ + Δ̂∂_νφ − 2HΔ̂φ + ∇̂H·∇̂φ + (F − R/3)∂_νφ` on a totally
    /// geodesic boundary. The term in `L` vanishes there and is not evaluated.
    pub fn chang_qing(&self, phi: &ScalarField) -> Result<ScalarField> {
        self.require_four()?;
        same_grid(self.g.grid(), &phi.grid)?;
        let bb = self.require_totally_geodesic()?;
        let bconn = &bb.connection;
        let lap = self.laplacian(phi)?;
        let dn_lap = bb.normal_derivative(&lap)?;
        let dn = bb.normal_derivative(phi)?;
        let lap_dn = laplacian(bconn, &dn, FaceMode::OneSided)?;
        let trace = bb.face.trace(phi)?;
        let tders = ScalarDerivatives::new(bconn, &trace, FaceMode::OneSided)?;
        let lap_t = tders.laplacian(bconn);
        let hders = ScalarDerivatives::new(bconn, &bb.mean_curvature, FaceMode::OneSided)?;
        let rb = bb.face.trace(&self.curvature.scalar())?;
        let values = (0..bb.face.len())
            .map(|b| {
                let hinv = bconn.ginv_at(b);
                let dh = raise(3, &hinv, &hders.du(b));
                let dp = tders.du(b);
                let cross: f64 = (0..3).map(|a| dh[a] * dp[a]).sum();
                0.5 * dn_lap.values[b] + lap_dn.values[b] - 2.0 * bb.mean_curvature.values[b] * lap_t.values[b]
                    + cross
                    + (bb.f_normal.values[b] - rb.values[b] / 3.0) * dn.values[b]
            })
            .collect();
        Ok(field(bb.grid(), values))
    }

    pub fn qt(&self, phi: Option<&ScalarField>) -> Result<QTBundle> {
        self.require_four()?;
        let q = self.q_curvature()?;
        let t = match self.boundary {
            Some(_) => Some(self.t_curvature()?),
            None => None,
        };
        let (p4, p3) = match phi {
            Some(phi) => {
                let p3 = match self.boundary {
                    Some(_) => Some(self.chang_qing(phi)?),
                    None => None,
                };
                (Some(self.paneitz(phi)?), p3)
            }
            None => (None, None),
        };
        Ok(QTBundle { q, t, p4, p3 })
    }

    /// `⟨P^{4,3}u, v⟩ = ∫ ΔuΔv + ⅔R⟨∇u,∇v⟩ − 2Ric(∇u,∇v) dV − 2∮ L(∇̂u,∇̂v) dS`
    /// for Neumann `u`, `v`.
    pub fn p43_form(&self, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        self.require_four()?;
        same_grid(self.g.grid(), &u.grid)?;
        same_grid(self.g.grid(), &v.grid)?;
        let n = 4;
        if let Some(bb) = &self.boundary {
            for f in [u, v] {
                let d = bb.normal_derivative(f)?.max_abs();
                if d > FORM_NEUMANN_TOLERANCE {
                    return Err(Error::NeumannViolation { max_normal_derivative: d });
                }
            }
        }
        let conn = &self.curvature.connection;
        let du = self.derivatives(u)?;
        let dv = self.derivatives(v)?;
        let lu = du.laplacian(conn);
        let lv = dv.laplacian(conn);
        let values = (0..u.values.len())
            .map(|l| {
                let ginv = conn.ginv_at(l);
                let a = raise(n, &ginv, &du.du(l));
                let b = raise(n, &ginv, &dv.du(l));
                let ric = self.curvature.ricci_at(l);
                let gm = self.g.at(l);
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += (2.0 / 3.0 * self.curvature.scalar_at(l) * gm[i][j] - 2.0 * ric[i][j]) * a[i] * b[j];
                    }
                }
                lu.values[l] * lv.values[l] + s
            })
            .collect();
        let mut total = integrate_volume(&field(&u.grid, values), &self.g)?;
        if let Some(bb) = &self.boundary {
            let bconn = &bb.connection;
            let tu = ScalarDerivatives::new(bconn, &bb.face.trace(u)?, FaceMode::OneSided)?;
            let tv = ScalarDerivatives::new(bconn, &bb.face.trace(v)?, FaceMode::OneSided)?;
            let vals = (0..bb.face.len())
                .map(|b| {
                    let hinv = bconn.ginv_at(b);
                    let a = raise(3, &hinv, &tu.du(b));
                    let c = raise(3, &hinv, &tv.du(b));
                    let l = bb.second_fundamental.at(b);
                    let mut s = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            s += l[i][j] * a[i] * c[j];
                        }
                    }
                    s
                })
                .collect();
            total -= 2.0 * bb.integrate(&field(bb.grid(), vals))?;
        }
        Ok(total)
    }

    pub fn volume(&self) -> Result<f64> {
        integrate_volume(&ScalarField::constant(self.g.grid().clone(), 1.0), &self.g)
    }

    pub fn invariants(&self, chi: i64) -> Result<InvariantReport> {
        let n = self.dim();
        let vol = self.volume()?;
        let r = self.curvature.scalar();
        let mut total_r = integrate_volume(&r, &self.g)?;
        if let Some(bb) = &self.boundary {
            total_r += bb.integrate(&bb.mean_curvature)?;
        }
        let yamabe_quotient = total_r / vol.powf((n as f64 - 2.0) / n as f64);
        let mut report = InvariantReport {
            kappa_p4: None,
            kappa_p3: None,
            kappa_total: None,
            gbc_residual: None,
            yamabe_quotient,
            sigma2_kappa_residual: None,
            euler_characteristic: chi,
        };
        if n != 4 {
            return Ok(report);
        }
        let q = self.q_curvature()?;
        let kp4 = integrate_volume(&q, &self.g)?;
        let kp3 = match &self.boundary {
            Some(bb) => bb.integrate(&self.t_curvature()?)?,
            None => 0.0,
        };
        let w2 = self.curvature.weyl_norm2();
        let qw = q.zip(&w2, |q, w| q + w / 8.0)?;
        let gbc = integrate_volume(&qw, &self.g)? + kp3 - 4.0 * PI * PI * chi as f64;
        let s2 = integrate_volume(&self.sigma2()?, &self.g)?;
        let kappa = kp4 + kp3;
        report.kappa_p4 = Some(kp4);
        report.kappa_p3 = Some(kp3);
        report.kappa_total = Some(kappa);
        report.gbc_residual = Some(gbc);
        report.sigma2_kappa_residual = Some((s2 - 0.5 * kappa).abs());
        Ok(report)
    }
}

pub fn paneitz_q(g: &MetricField, phi: &ScalarField) -> Result<QTBundle> {
    let geo = Geometry::new(g)?;
    geo.require_four()?;
    Ok(QTBundle { q: geo.q_curvature()?, t: None, p4: Some(geo.paneitz(phi)?), p3: None })
}

pub fn p3_t_boundary(g: &MetricField, phi: &ScalarField) -> Result<QTBundle> {
    if g.grid().boundary_axis().is_none() {
        return Err(Error::NoBoundary);
    }
    let geo = Geometry::new(g)?;
    geo.require_four()?;
    Ok(QTBundle { q: geo.q_curvature()?, t: Some(geo.t_curvature()?), p4: None, p3: Some(geo.chang_qing(phi)?) })
}

pub fn p43_form(g: &MetricField, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    Geometry::new(g)?.p43_form(u, v)
}

pub fn invariants(g: &MetricField, chi: i64) -> Result<InvariantReport> {
    Geometry::new(g)?.invariants(chi)
}
