//! Boundary face of a bounded chart: traces, normal derivatives and the
//! extrinsic curvature of the face.
//!
//! The bounded axis is the first axis of a polar chart, so `e_0 = ∂_0` and the
//! tangential reference frame of the face is the reference frame of the
//! boundary grid. `ν` is the inward unit normal and `L_ab = ⟨∇_{e_a} e_b, ν⟩`,
//! which equals `−½ ∂_ν g_ab` in normal coordinates.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rayon::prelude::*;

use crate::calculus::{quad, sym_parities, Connection, ScalarDerivatives};
use crate::curvature::{compute_curvature, CurvatureBundle};
use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField, SymTensor2Field};
use crate::grid::{reference_connection, BoundaryGrid, ChartGrid, FaceMode, Frame, FrameConnection};
use crate::linalg::{self, nsym, sym_index, Mat, ZERO};
use crate::stencil::STENCIL_WIDTH;

/// Extrapolation from the last interior nodes of the bounded axis to the face.
#[derive(Clone, Debug)]
pub struct Face {
    pub parent: Arc<ChartGrid>,
    pub boundary: BoundaryGrid,
    weights: [[f64; STENCIL_WIDTH]; 3],
    cot_end: f64,
}

impl Face {
    pub fn new(parent: &Arc<ChartGrid>) -> Result<Self> {
        let (k, weights) = parent.face_weights().ok_or(Error::NoBoundary)?;
        if k != 0 || !parent.is_polar() {
            return Err(Error::InvalidParameter("the bounded axis must be the polar axis of a sphere chart".into()));
        }
        let end = parent.axis(0).end;
        let cot_end = if (end - FRAC_PI_2).abs() < 1e-14 { 0.0 } else { end.cos() / end.sin() };
        Ok(Face { parent: parent.clone(), boundary: parent.boundary()?, weights, cot_end })
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.boundary.grid
    }

    pub fn len(&self) -> usize {
        self.boundary.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parent nodes of the stencil feeding boundary node `b`, nearest the face last.
    fn column(&self, b: usize) -> [usize; STENCIL_WIDTH] {
        let bn = self.boundary.grid.node(b);
        let mut out = [0; STENCIL_WIDTH];
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.parent.face_node(0, &bn, STENCIL_WIDTH - 1 - p);
        }
        out
    }

    fn apply(&self, which: usize, b: usize, f: &dyn Fn(usize) -> f64) -> f64 {
        let col = self.column(b);
        let last = f(col[STENCIL_WIDTH - 1]);
        let w = &self.weights[which];
        // weights for derivatives sum to zero and for the value to one; the
        // offset keeps constant data exact
        let base = if which == 0 { last } else { 0.0 };
        let mut acc = 0.0;
        for p in 0..STENCIL_WIDTH {
            acc += w[p] * (f(col[p]) - last);
        }
        base + acc
    }

    /// Value at the face of a quantity sampled on parent nodes.
    pub fn value(&self, b: usize, f: &dyn Fn(usize) -> f64) -> f64 {
        self.apply(0, b, f)
    }

    /// `∂_0` at the face.
    pub fn normal_coordinate_derivative(&self, b: usize, f: &dyn Fn(usize) -> f64) -> f64 {
        self.apply(1, b, f)
    }

    /// `∂_0²` at the face.
    pub fn normal_coordinate_second_derivative(&self, b: usize, f: &dyn Fn(usize) -> f64) -> f64 {
        self.apply(2, b, f)
    }

    /// Face value of a rank-4 or matrix quantity, entry by entry.
    pub fn value_mat(&self, n: usize, b: usize, f: &dyn Fn(usize) -> Mat) -> Mat {
        let col = self.column(b);
        let vals: Vec<Mat> = col.iter().map(|l| f(*l)).collect();
        let mut out = ZERO;
        for i in 0..n {
            for j in 0..n {
                out[i][j] = self.value_from(&vals.iter().map(|m| m[i][j]).collect::<Vec<_>>());
            }
        }
        out
    }

    fn value_from(&self, vals: &[f64]) -> f64 {
        let last = vals[STENCIL_WIDTH - 1];
        let mut acc = last;
        for p in 0..STENCIL_WIDTH {
            acc += self.weights[0][p] * (vals[p] - last);
        }
        acc
    }

    /// Trace of a parent scalar field on the face.
    pub fn trace(&self, f: &ScalarField) -> Result<ScalarField> {
        same_grid(&f.grid, &self.parent)?;
        let values = (0..self.len()).map(|b| self.value(b, &|l| f.values[l])).collect();
        Ok(ScalarField { grid: self.grid().clone(), values })
    }

    /// `∂_0 f` of a parent scalar field at the face.
    pub fn trace_normal(&self, f: &ScalarField) -> Result<ScalarField> {
        same_grid(&f.grid, &self.parent)?;
        let values = (0..self.len()).map(|b| self.normal_coordinate_derivative(b, &|l| f.values[l])).collect();
        Ok(ScalarField { grid: self.grid().clone(), values })
    }

    /// Reference frame of the parent chart at a face point.
    pub fn parent_frame(&self, b: usize) -> Frame {
        let g = self.grid();
        let bf = g.frame(&g.node(b));
        let n = self.parent.dim();
        let mut scale = [1.0; 4];
        let mut kappa = [0.0; 4];
        kappa[0] = self.cot_end;
        for j in 1..n {
            scale[j] = bf.scale[j - 1];
            kappa[j] = bf.kappa[j - 1];
        }
        Frame { scale, kappa }
    }

    /// Reference connection of the parent chart at a face point.
    pub fn parent_reference(&self, b: usize) -> FrameConnection {
        reference_connection(self.parent.dim(), &self.parent_frame(b))
    }

    /// Full frame gradient `e_a f` of a parent scalar at the face: the normal
    /// component from one-sided weights, tangential ones from the trace.
    pub fn gradient(&self, f: &ScalarField) -> Result<Vec<[f64; 4]>> {
        let tr = self.trace(f)?;
        let (d, _) = crate::calculus::partials(&tr, FaceMode::OneSided);
        let n = self.parent.dim();
        Ok((0..self.len())
            .map(|b| {
                let mut g = [0.0; 4];
                g[0] = self.normal_coordinate_derivative(b, &|l| f.values[l]);
                for a in 1..n {
                    g[a] = d[b * (n - 1) + a - 1];
                }
                g
            })
            .collect())
    }
}

/// Boundary curvature quantities.
#[derive(Clone, Debug)]
pub struct BoundaryBundle {
    pub face: Face,
    /// Full parent metric at the face.
    pub face_metric: Vec<Mat>,
    pub face_inverse: Vec<Mat>,
    /// Induced metric `ĝ` on the boundary grid.
    pub metric: MetricField,
    pub connection: Connection,
    /// Inward unit normal, parent frame components.
    pub normal: Vec<[f64; 4]>,
    pub second_fundamental: SymTensor2Field,
    pub mean_curvature: ScalarField,
    /// `F = Ric(ν, ν)`.
    pub f_normal: ScalarField,
    /// `⟨G, L⟩ = R(e_a, ν, e_b, ν) L^ab`.
    pub gl: ScalarField,
    /// `|Ric(ν, ·) + ∇̂^b L_·b − d̂ tr L|_ĝ`.
    pub codazzi: ScalarField,
}

/// Boundary bundle of `g`.
pub fn compute_boundary(g: &MetricField) -> Result<BoundaryBundle> {
    let curv = compute_curvature(g)?;
    BoundaryBundle::new(&curv, g)
}

impl BoundaryBundle {
    pub fn new(curv: &CurvatureBundle, g: &MetricField) -> Result<Self> {
        let parent = g.grid().clone();
        let face = Face::new(&parent)?;
        let n = parent.dim();
        let m = n - 1;
        let nb = face.len();
        let bgrid = face.grid().clone();
        let conn = &curv.connection;

        let face_metric: Vec<Mat> = (0..nb).map(|b| face.value_mat(n, b, &|l| g.at(l))).collect();
        let mut face_inverse = Vec::with_capacity(nb);
        for (b, fm) in face_metric.iter().enumerate() {
            let (inv, det) = linalg::inverse(n, fm).ok_or(Error::NotPositiveDefinite { node: b, min_eigenvalue: 0.0 })?;
            if !(det > 0.0) {
                return Err(Error::NotPositiveDefinite { node: b, min_eigenvalue: linalg::min_eigenvalue(n, fm) });
            }
            face_inverse.push(inv);
        }
        let induced = SymTensor2Field::from_fn_nodes(bgrid.clone(), |b| {
            let mut h = ZERO;
            for i in 0..m {
                for j in 0..m {
                    h[i][j] = face_metric[b][i + 1][j + 1];
                }
            }
            h
        });
        let metric = MetricField::new(induced, "induced")?;
        let bconn = Connection::new(&metric)?;

        let normal: Vec<[f64; 4]> = face_inverse
            .iter()
            .map(|gi| {
                let s = gi[0][0].sqrt();
                let mut v = [0.0; 4];
                for a in 0..n {
                    v[a] = -gi[a][0] / s;
                }
                v
            })
            .collect();

        // frame connection of g at the face
        let ns = nsym(n);
        let stride = n * ns;
        let gamma: Vec<[[[f64; 4]; 4]; 4]> = (0..nb)
            .map(|b| {
                let mut gm = face.parent_reference(b);
                for c in 0..n {
                    for i in 0..n {
                        for j in i..n {
                            let s = c * ns + sym_index(n, i, j);
                            let v = face.value(b, &|l| conn.diff[l * stride + s]);
                            gm[c][i][j] += v;
                            if j != i {
                                gm[c][j][i] += v;
                            }
                        }
                    }
                }
                gm
            })
            .collect();

        let mut l_data = vec![0.0; nb * nsym(m)];
        let mut h_vals = vec![0.0; nb];
        for b in 0..nb {
            let gm = &face_metric[b];
            let nu = &normal[b];
            let mut lt = ZERO;
            for i in 0..m {
                for j in 0..m {
                    let mut v = 0.0;
                    for c in 0..n {
                        let mut nc = 0.0;
                        for d in 0..n {
                            nc += gm[c][d] * nu[d];
                        }
                        v += gamma[b][c][i + 1][j + 1] * nc;
                    }
                    lt[i][j] = v;
                }
            }
            linalg::pack(m, &lt, &mut l_data[b * nsym(m)..(b + 1) * nsym(m)]);
            let lt = linalg::unpack(m, &l_data[b * nsym(m)..(b + 1) * nsym(m)]);
            h_vals[b] = linalg::trace_with(m, &bconn.ginv_at(b), &lt) / m as f64;
        }
        let second_fundamental = SymTensor2Field { grid: bgrid.clone(), data: l_data };
        let mean_curvature = ScalarField { grid: bgrid.clone(), values: h_vals };

        let mut f_vals = vec![0.0; nb];
        let mut gl_vals = vec![0.0; nb];
        let mut ric_nu_t = vec![[0.0; 4]; nb];
        for b in 0..nb {
            let nu = &normal[b];
            let ric = face.value_mat(n, b, &|l| curv.ricci_at(l));
            let mut f = 0.0;
            for a in 0..n {
                for c in 0..n {
                    f += ric[a][c] * nu[a] * nu[c];
                }
            }
            f_vals[b] = f;
            for a in 0..m {
                let mut s = 0.0;
                for c in 0..n {
                    s += ric[c][a + 1] * nu[c];
                }
                ric_nu_t[b][a] = s;
            }
            // R(e_a, ν, e_b, ν) on tangential a, b
            let col = face.column(b);
            let rms: Vec<_> = col.iter().map(|l| curv.riemann_at(*l)).collect();
            let mut g_an = ZERO;
            for a in 0..m {
                for bb in 0..m {
                    let mut v = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            let w = nu[p] * nu[q];
                            if w == 0.0 {
                                continue;
                            }
                            let vals: Vec<f64> = rms.iter().map(|r| r[a + 1][p][bb + 1][q]).collect();
                            v += w * face.value_from(&vals);
                        }
                    }
                    g_an[a][bb] = v;
                }
            }
            let hinv = bconn.ginv_at(b);
            gl_vals[b] = linalg::inner(m, &hinv, &g_an, &second_fundamental.at(b));
        }

        let codazzi = codazzi_residual(&bconn, &second_fundamental, &ric_nu_t)?;

        Ok(BoundaryBundle {
            face,
            face_metric,
            face_inverse,
            metric,
            connection: bconn,
            normal,
            second_fundamental,
            mean_curvature,
            f_normal: ScalarField { grid: bgrid.clone(), values: f_vals },
            gl: ScalarField { grid: bgrid, values: gl_vals },
            codazzi,
        })
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        self.face.grid()
    }

    /// `max |L|_ĝ` over the face.
    pub fn max_second_fundamental(&self) -> f64 {
        let m = self.metric.dim();
        (0..self.grid().len())
            .map(|b| {
                let l = self.second_fundamental.at(b);
                linalg::inner(m, &self.connection.ginv_at(b), &l, &l).max(0.0).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `∂_ν f = ν^a e_a f` at the face for a parent scalar field.
    pub fn normal_derivative(&self, f: &ScalarField) -> Result<ScalarField> {
        let n = self.face.parent.dim();
        let grad = self.face.gradient(f)?;
        let values = grad
            .iter()
            .zip(&self.normal)
            .map(|(g, nu)| (0..n).map(|a| g[a] * nu[a]).sum())
            .collect();
        Ok(ScalarField { grid: self.grid().clone(), values })
    }

    /// `∮ s dS_g`.
    pub fn integrate(&self, s: &ScalarField) -> Result<f64> {
        integrate_boundary(s, &self.metric)
    }
}

/// `∮ s dS` for a scalar on the boundary grid, with the induced metric `ĝ`.
pub fn integrate_boundary(s: &ScalarField, induced: &MetricField) -> Result<f64> {
    crate::calculus::integrate_volume(s, induced)
}

/// Traced Codazzi residual `|Ric(ν, e_a) + ∇̂^b L_ab − ê_a tr L|_ĝ`.
fn codazzi_residual(conn: &Connection, l: &SymTensor2Field, ric_nu: &[[f64; 4]]) -> Result<ScalarField> {
    let grid = conn.grid.clone();
    let m = grid.dim();
    let ms = nsym(m);
    let par = sym_parities(&grid);
    let tr: Vec<f64> = (0..grid.len()).map(|b| linalg::trace_with(m, &conn.ginv_at(b), &l.at(b))).collect();
    let trf = ScalarField { grid: grid.clone(), values: tr };
    let dtr = ScalarDerivatives::new(conn, &trf, FaceMode::OneSided)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|b| {
            let nd = grid.node(b);
            let fr = grid.frame(&nd);
            let hinv = conn.ginv_at(b);
            let gam = conn.gamma2_at(b);
            let lb = l.at(b);
            // dl[k][i][j] = ê_k L_ij
            let mut dl = [ZERO; 4];
            for (k, dk) in dl.iter_mut().enumerate().take(m) {
                for i in 0..m {
                    for j in i..m {
                        let s = sym_index(m, i, j);
                        let v = grid.diff_at(&l.data, ms, s, &par[s], k, 1, FaceMode::OneSided, &nd) / fr.scale[k];
                        dk[i][j] = v;
                        dk[j][i] = v;
                    }
                }
            }
            let du = dtr.du(b);
            let mut v = [0.0; 4];
            for (a, va) in v.iter_mut().enumerate().take(m) {
                let mut div = 0.0;
                for k in 0..m {
                    for j in 0..m {
                        let mut cov = dl[k][a][j];
                        for e in 0..m {
                            cov -= gam[e][k][a] * lb[e][j] + gam[e][k][j] * lb[a][e];
                        }
                        div += hinv[k][j] * cov;
                    }
                }
                *va = ric_nu[b][a] + div - du[a];
            }
            quad(m, &hinv, &v).max(0.0).sqrt()
        })
        .collect();
    Ok(ScalarField { grid, values })
}
