//! Interior curvature of a sampled metric.
//!
//! Sign conventions: `R_abcd` is lowered so that `Ric_bd = g^{ac} R_abcd` and
//! the unit sphere has sectional curvature `R_abab / (g_aa g_bb − g_ab²) = +1`.
//! With `C = ∇ − ∇̊` the difference against the reference connection,
//!
//! `R^a_bcd = R̊^a_bcd + ∇̊_c C^a_db − ∇̊_d C^a_cb + C^a_ce C^e_db − C^a_de C^e_cb`,
//!
//! and the lowered tensor is projected onto the algebraic curvature tensors
//! (pair antisymmetry, pair exchange, first Bianchi), which makes those
//! identities exact in floating point.

use std::sync::Arc;

use rayon::prelude::*;

use crate::calculus::{sym_parities, Connection};
use crate::error::Result;
use crate::field::{MetricField, ScalarField, SymTensor2Field};
use crate::grid::{constant_components, ChartGrid, FaceMode, Parity};
use crate::linalg::{self, nsym, sym_index, Mat, ZERO};

pub type Rank4 = [[[[f64; 4]; 4]; 4]; 4];

/// Index pairs `(a, b)` with `a < b`, used to pack antisymmetric pairs.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

/// Packed size of a pair-symmetric 4-tensor.
pub const fn npair_sym(n: usize) -> usize {
    let p = n * (n - 1) / 2;
    p * (p + 1) / 2
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    n: usize,
    riemann: usize,
    ricci: usize,
    scalar: usize,
    trace_free: usize,
    weyl: usize,
    schouten: usize,
    norms: usize,
    width: usize,
}

impl Layout {
    fn new(n: usize) -> Self {
        let ns = nsym(n);
        let nr = npair_sym(n);
        let riemann = 0;
        let ricci = riemann + nr;
        let scalar = ricci + ns;
        let trace_free = scalar + 1;
        let weyl = trace_free + ns;
        let schouten = weyl + nr;
        let norms = schouten + ns;
        Layout { n, riemann, ricci, scalar, trace_free, weyl, schouten, norms, width: norms + 3 }
    }
}

/// All interior curvature quantities of one metric.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub connection: Connection,
    layout: Layout,
    record: Vec<f64>,
}

/// Packs a rank-4 tensor with the Riemann symmetries into the pair-symmetric layout.
pub fn pack_rank4(n: usize, r: &Rank4, out: &mut [f64]) {
    let ps = pairs(n);
    let mut s = 0;
    for p in 0..ps.len() {
        for q in p..ps.len() {
            let (a, b) = ps[p];
            let (c, d) = ps[q];
            out[s] = r[a][b][c][d];
            s += 1;
        }
    }
}

pub fn unpack_rank4(n: usize, packed: &[f64]) -> Rank4 {
    let ps = pairs(n);
    let mut r = [[[[0.0; 4]; 4]; 4]; 4];
    let mut s = 0;
    for p in 0..ps.len() {
        for q in p..ps.len() {
            let v = packed[s];
            s += 1;
            for &((a, b), (c, d)) in &[(ps[p], ps[q]), (ps[q], ps[p])] {
                r[a][b][c][d] = v;
                r[b][a][c][d] = -v;
                r[a][b][d][c] = -v;
                r[b][a][d][c] = v;
            }
        }
    }
    r
}

/// Kulkarni–Nomizu product `(h ⊙ k)_abcd = h_ac k_bd + h_bd k_ac − h_ad k_bc − h_bc k_ad`.
pub fn kulkarni_nomizu(n: usize, h: &Mat, k: &Mat) -> Rank4 {
    let mut r = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    r[a][b][c][d] = h[a][c] * k[b][d] + h[b][d] * k[a][c] - h[a][d] * k[b][c] - h[b][c] * k[a][d];
                }
            }
        }
    }
    r
}

/// Full contraction `T_abcd T^abcd` of a tensor with the Riemann symmetries,
/// as `4 tr(T G T G)` over antisymmetric index pairs with `G_(ab)(cd) = g^ac g^bd − g^ad g^bc`.
pub fn rank4_norm2(n: usize, ginv: &Mat, t: &Rank4) -> f64 {
    let ps = pairs(n);
    let m = ps.len();
    let mut tp = [[0.0; 6]; 6];
    let mut gp = [[0.0; 6]; 6];
    for p in 0..m {
        let (a, b) = ps[p];
        for q in 0..m {
            let (c, d) = ps[q];
            tp[p][q] = t[a][b][c][d];
            gp[p][q] = ginv[a][c] * ginv[b][d] - ginv[a][d] * ginv[b][c];
        }
    }
    let mut tg = [[0.0; 6]; 6];
    for p in 0..m {
        for q in 0..m {
            let mut s = 0.0;
            for r in 0..m {
                s += tp[p][r] * gp[r][q];
            }
            tg[p][q] = s;
        }
    }
    let mut s = 0.0;
    for p in 0..m {
        for q in 0..m {
            s += tg[p][q] * tg[q][p];
        }
    }
    4.0 * s
}

#[inline]
fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Orthogonal projection of a 4-tensor that is antisymmetric in its last
/// pair onto the algebraic curvature tensors.
pub fn project_curvature(n: usize, t: &Rank4) -> Rank4 {
    let mut s = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let x = 0.5 * (t[a][b][c][d] - t[b][a][c][d]);
                    let y = 0.5 * (t[c][d][a][b] - t[d][c][a][b]);
                    s[a][b][c][d] = 0.5 * (x + y);
                }
            }
        }
    }
    let mut r = s;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    r[a][b][c][d] -= (s[a][b][c][d] + s[a][c][d][b] + s[a][d][b][c]) / 3.0;
                }
            }
        }
    }
    r
}

/// Algebraic curvature quantities at one node from `R_abcd`, `g` and `g⁻¹`.
pub struct PointCurvature {
    pub riemann: Rank4,
    pub ricci: Mat,
    pub scalar: f64,
    pub trace_free: Mat,
    pub schouten: Mat,
    pub weyl: Rank4,
    pub weyl_norm2: f64,
    pub trace_free_norm2: f64,
    pub ricci_norm2: f64,
}

impl PointCurvature {
    pub fn from_riemann(n: usize, riemann: Rank4, g: &Mat, ginv: &Mat) -> Self {
        let mut ricci = ZERO;
        for b in 0..n {
            for d in b..n {
                let mut s = 0.0;
                for a in 0..n {
                    for c in 0..n {
                        s += ginv[a][c] * riemann[a][b][c][d];
                    }
                }
                ricci[b][d] = s;
                ricci[d][b] = s;
            }
        }
        let scalar = linalg::trace_with(n, ginv, &ricci);
        let nf = n as f64;
        let mut trace_free = ZERO;
        let mut schouten = ZERO;
        for i in 0..n {
            for j in 0..n {
                trace_free[i][j] = ricci[i][j] - scalar / nf * g[i][j];
                schouten[i][j] = (ricci[i][j] - scalar / (2.0 * (nf - 1.0)) * g[i][j]) / (nf - 2.0);
            }
        }
        let weyl = if n >= 4 {
            let kn = kulkarni_nomizu(n, &schouten, g);
            let mut w = riemann;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            w[a][b][c][d] -= kn[a][b][c][d];
                        }
                    }
                }
            }
            w
        } else {
            [[[[0.0; 4]; 4]; 4]; 4]
        };
        let weyl_norm2 = if n >= 4 { rank4_norm2(n, ginv, &weyl).max(0.0) } else { 0.0 };
        PointCurvature {
            riemann,
            trace_free_norm2: linalg::inner(n, ginv, &trace_free, &trace_free),
            ricci_norm2: linalg::inner(n, ginv, &ricci, &ricci),
            ricci,
            scalar,
            trace_free,
            schouten,
            weyl,
            weyl_norm2,
        }
    }
}

/// Computes the curvature bundle of `g`.
pub fn compute_curvature(g: &MetricField) -> Result<CurvatureBundle> {
    let connection = Connection::new(g)?;
    Ok(CurvatureBundle::from_connection(g, connection))
}

impl CurvatureBundle {
    pub fn from_connection(g: &MetricField, connection: Connection) -> Self {
        let grid = g.grid().clone();
        let n = grid.dim();
        let ns = nsym(n);
        let layout = Layout::new(n);
        let stride1 = n * ns;
        let k0 = grid.reference_curvature();
        // parity of C^a_{ij}
        let par: Vec<Parity> = (0..n)
            .flat_map(|c| (0..n).flat_map(move |i| (i..n).map(move |j| (c, i, j))))
            .map(|(c, i, j)| grid.parity(&[c, i, j]))
            .collect();
        let flat = constant_components(&connection.diff, stride1, &par);
        let mut record = vec![0.0; grid.len() * layout.width];
        let conn = &connection;
        record.par_chunks_mut(layout.width).enumerate().for_each(|(lin, out)| {
            let nd = grid.node(lin);
            let fr = grid.frame(&nd);
            let gm = g.at(lin);
            let ginv = conn.ginv_at(lin);
            let c = conn.diff_at(lin);
            let g0 = conn.reference_at(lin);
            // dc[k][a][i][j] = e_k C^a_ij
            let mut dc = [[[[0.0; 4]; 4]; 4]; 4];
            for (k, dk) in dc.iter_mut().enumerate().take(n) {
                for (a, dka) in dk.iter_mut().enumerate().take(n) {
                    for i in 0..n {
                        for j in i..n {
                            let s = a * ns + sym_index(n, i, j);
                            if flat[s] {
                                continue;
                            }
                            let v = grid.diff_at(&conn.diff, stride1, s, &par[s], k, 1, FaceMode::OneSided, &nd)
                                / fr.scale[k];
                            dka[i][j] = v;
                            dka[j][i] = v;
                        }
                    }
                }
            }
            // cov[k][a][i][j] = (∇̊_k C)^a_ij
            let mut cov = dc;
            for (k, ck) in cov.iter_mut().enumerate().take(n) {
                for (a, cka) in ck.iter_mut().enumerate().take(n) {
                    for i in 0..n {
                        for j in i..n {
                            let mut v = cka[i][j];
                            for e in 0..n {
                                v += g0[a][k][e] * c[e][i][j] - g0[e][k][i] * c[a][e][j] - g0[e][k][j] * c[a][i][e];
                            }
                            cka[i][j] = v;
                            cka[j][i] = v;
                        }
                    }
                }
            }
            // R^a_bcd
            let mut up = [[[[0.0; 4]; 4]; 4]; 4];
            for (a, ua) in up.iter_mut().enumerate().take(n) {
                for b in 0..n {
                    for (cc, uab) in ua[b].iter_mut().enumerate().take(n) {
                        for d in cc + 1..n {
                            let mut v = k0 * (delta(a, cc) * delta(b, d) - delta(a, d) * delta(b, cc));
                            v += cov[cc][a][d][b] - cov[d][a][cc][b];
                            for e in 0..n {
                                v += c[a][cc][e] * c[e][d][b] - c[a][d][e] * c[e][cc][b];
                            }
                            uab[d] = v;
                        }
                    }
                }
            }
            let mut low = [[[[0.0; 4]; 4]; 4]; 4];
            for a in 0..n {
                for b in 0..n {
                    for cc in 0..n {
                        for d in cc + 1..n {
                            let mut v = 0.0;
                            for e in 0..n {
                                v += gm[a][e] * up[e][b][cc][d];
                            }
                            low[a][b][cc][d] = v;
                            low[a][b][d][cc] = -v;
                        }
                    }
                }
            }
            let rm = project_curvature(n, &low);
            let pc = PointCurvature::from_riemann(n, rm, &gm, &ginv);
            pack_rank4(n, &pc.riemann, &mut out[layout.riemann..]);
            linalg::pack(n, &pc.ricci, &mut out[layout.ricci..]);
            out[layout.scalar] = pc.scalar;
            linalg::pack(n, &pc.trace_free, &mut out[layout.trace_free..]);
            pack_rank4(n, &pc.weyl, &mut out[layout.weyl..]);
            linalg::pack(n, &pc.schouten, &mut out[layout.schouten..]);
            out[layout.norms] = pc.weyl_norm2;
            out[layout.norms + 1] = pc.trace_free_norm2;
            out[layout.norms + 2] = pc.ricci_norm2;
        });
        CurvatureBundle { connection, layout, record }
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.connection.grid
    }

    pub fn dim(&self) -> usize {
        self.layout.n
    }

    fn rec(&self, node: usize) -> &[f64] {
        &self.record[node * self.layout.width..(node + 1) * self.layout.width]
    }

    fn scalar_of(&self, offset: usize) -> ScalarField {
        let values = (0..self.grid().len()).map(|l| self.rec(l)[offset]).collect();
        ScalarField { grid: self.grid().clone(), values }
    }

    fn sym_of(&self, offset: usize) -> SymTensor2Field {
        let ns = nsym(self.dim());
        let mut data = Vec::with_capacity(self.grid().len() * ns);
        for l in 0..self.grid().len() {
            data.extend_from_slice(&self.rec(l)[offset..offset + ns]);
        }
        SymTensor2Field { grid: self.grid().clone(), data }
    }

    pub fn riemann_at(&self, node: usize) -> Rank4 {
        unpack_rank4(self.dim(), &self.rec(node)[self.layout.riemann..])
    }

    pub fn weyl_at(&self, node: usize) -> Rank4 {
        unpack_rank4(self.dim(), &self.rec(node)[self.layout.weyl..])
    }

    pub fn ricci_at(&self, node: usize) -> Mat {
        linalg::unpack(self.dim(), &self.rec(node)[self.layout.ricci..])
    }

    pub fn trace_free_at(&self, node: usize) -> Mat {
        linalg::unpack(self.dim(), &self.rec(node)[self.layout.trace_free..])
    }

    pub fn schouten_at(&self, node: usize) -> Mat {
        linalg::unpack(self.dim(), &self.rec(node)[self.layout.schouten..])
    }

    pub fn scalar_at(&self, node: usize) -> f64 {
        self.rec(node)[self.layout.scalar]
    }

    /// `(|W|², |E|², |Ric|²)` at a node.
    pub fn norms_at(&self, node: usize) -> (f64, f64, f64) {
        let r = self.rec(node);
        let o = self.layout.norms;
        (r[o], r[o + 1], r[o + 2])
    }

    pub fn scalar(&self) -> ScalarField {
        self.scalar_of(self.layout.scalar)
    }

    pub fn ricci(&self) -> SymTensor2Field {
        self.sym_of(self.layout.ricci)
    }

    pub fn trace_free(&self) -> SymTensor2Field {
        self.sym_of(self.layout.trace_free)
    }

    pub fn schouten(&self) -> SymTensor2Field {
        self.sym_of(self.layout.schouten)
    }

    pub fn weyl_norm2(&self) -> ScalarField {
        self.scalar_of(self.layout.norms)
    }

    pub fn trace_free_norm2(&self) -> ScalarField {
        self.scalar_of(self.layout.norms + 1)
    }

    pub fn ricci_norm2(&self) -> ScalarField {
        self.scalar_of(self.layout.norms + 2)
    }

    /// Largest violation over all nodes of the algebraic identities the
    /// stored tensors must satisfy.
    pub fn algebraic_defects(&self, g: &MetricField) -> AlgebraicDefects {
        let n = self.dim();
        let mut out = AlgebraicDefects::default();
        for l in 0..self.grid().len() {
            let r = self.riemann_at(l);
            let w = self.weyl_at(l);
            let ginv = self.connection.ginv_at(l);
            let scale = 1.0 + self.scalar_at(l).abs();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let x = r[a][b][c][d];
                            out.symmetry = out
                                .symmetry
                                .max((x + r[b][a][c][d]).abs())
                                .max((x + r[a][b][d][c]).abs())
                                .max((x - r[c][d][a][b]).abs());
                            out.bianchi = out.bianchi.max((x + r[a][c][d][b] + r[a][d][b][c]).abs() / scale);
                        }
                    }
                }
            }
            out.trace_free_trace =
                out.trace_free_trace.max(linalg::trace_with(n, &ginv, &self.trace_free_at(l)).abs() / scale);
            for b in 0..n {
                for d in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for c in 0..n {
                            s += ginv[a][c] * w[a][b][c][d];
                        }
                    }
                    out.weyl_trace = out.weyl_trace.max(s.abs() / scale);
                }
            }
            let _ = g;
        }
        out
    }

    /// Contracted Bianchi residual `max |2∇^j Ric_ij − e_i R|_g`.
    pub fn schur_residual(&self) -> f64 {
        let grid = self.grid().clone();
        let n = self.dim();
        let ns = nsym(n);
        let ric = self.ricci();
        let rs = self.scalar();
        let par = sym_parities(&grid);
        (0..grid.len())
            .into_par_iter()
            .map(|l| {
                let nd = grid.node(l);
                let fr = grid.frame(&nd);
                let ginv = self.connection.ginv_at(l);
                let g2 = self.connection.gamma2_at(l);
                let rc = ric.at(l);
                // dric[k][i][j] = ∂_k Ric_ij
                let mut dric = [ZERO; 4];
                for (k, dk) in dric.iter_mut().enumerate().take(n) {
                    for i in 0..n {
                        for j in i..n {
                            let s = sym_index(n, i, j);
                            let v = grid.diff_at(&ric.data, ns, s, &par[s], k, 1, FaceMode::OneSided, &nd)
                                / fr.scale[k];
                            dk[i][j] = v;
                            dk[j][i] = v;
                        }
                    }
                }
                let mut v = [0.0; 4];
                for (i, vi) in v.iter_mut().enumerate().take(n) {
                    let dr =
                        grid.diff_at(&rs.values, 1, 0, &Parity::EVEN, i, 1, FaceMode::OneSided, &nd) / fr.scale[i];
                    let mut div = 0.0;
                    for k in 0..n {
                        for j in 0..n {
                            let mut cov = dric[k][i][j];
                            for m in 0..n {
                                cov -= g2[m][k][i] * rc[m][j] + g2[m][k][j] * rc[i][m];
                            }
                            div += ginv[k][j] * cov;
                        }
                    }
                    *vi = 2.0 * div - dr;
                }
                crate::calculus::quad(n, &ginv, &v).max(0.0).sqrt()
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlgebraicDefects {
    pub symmetry: f64,
    pub bianchi: f64,
    pub trace_free_trace: f64,
    pub weyl_trace: f64,
}

/// The tensor `A^t = (Ric − t R/(2(n−1)) g)/(n−2)`.
#[derive(Clone, Debug)]
pub struct GeneralizedSchouten {
    pub t: f64,
    pub tensor: SymTensor2Field,
}

/// Pointwise `A^t` from Ricci, scalar curvature and metric.
pub fn schouten_t(n: usize, t: f64, ric: &Mat, r: f64, g: &Mat) -> Mat {
    let nf = n as f64;
    let mut a = ZERO;
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (ric[i][j] - t * r / (2.0 * (nf - 1.0)) * g[i][j]) / (nf - 2.0);
        }
    }
    a
}

pub fn schouten_generalized(bundle: &CurvatureBundle, g: &MetricField, t: f64) -> GeneralizedSchouten {
    let n = bundle.dim();
    let grid = bundle.grid().clone();
    let tensor = SymTensor2Field {
        data: (0..grid.len())
            .flat_map(|l| {
                let a = schouten_t(n, t, &bundle.ricci_at(l), bundle.scalar_at(l), &g.at(l));
                let mut p = vec![0.0; nsym(n)];
                linalg::pack(n, &a, &mut p);
                p
            })
            .collect(),
        grid,
    };
    GeneralizedSchouten { t, tensor }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_catalog_manifold, CatalogId, Resolution};

    #[test]
    fn flat_torus_has_no_curvature() {
        let (_, g) = build_catalog_manifold(&CatalogId::FlatTorus { n: 3 }, &Resolution::new(8)).unwrap();
        let b = compute_curvature(&g).unwrap();
        assert!(b.scalar().max_abs() < 1e-10);
        assert!(b.ricci_norm2().max_abs() < 1e-20);
    }

    #[test]
    fn round_three_sphere_oracle() {
        let (grid, g) = build_catalog_manifold(&CatalogId::RoundSphere { n: 3, r: 1.0 }, &Resolution::new(32)).unwrap();
        let b = compute_curvature(&g).unwrap();
        let r = b.scalar();
        assert!(r.values.iter().all(|v| (v - 6.0).abs() < 1e-5), "R range {} {}", r.min(), r.max());
        for l in (0..grid.len()).step_by(97) {
            let ric = b.ricci_at(l);
            let gm = g.at(l);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((ric[i][j] - 2.0 * gm[i][j]).abs() < 1e-5);
                }
            }
        }
        assert_eq!(b.weyl_norm2().max_abs(), 0.0);
    }

    #[test]
    fn kulkarni_nomizu_of_metric_is_constant_curvature_tensor() {
        let g = [[1.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0], [0.0, 0.0, 3.0, 0.0], [0.0, 0.0, 0.0, 4.0]];
        let kn = kulkarni_nomizu(4, &g, &g);
        assert_eq!(kn[0][1][0][1], 2.0 * 1.0 * 2.0);
        let mut packed = vec![0.0; npair_sym(4)];
        pack_rank4(4, &kn, &mut packed);
        assert_eq!(unpack_rank4(4, &packed), kn);
    }
}
