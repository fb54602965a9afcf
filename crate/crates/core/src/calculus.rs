//! Levi-Civita connection data, covariant derivatives of scalars, and quadrature.
//!
//! All tensor components are taken in the reference frame of the grid (see
//! [`crate::grid`]). The connection of `g` is stored as the difference tensor
//! `C = ∇ − ∇̊` against the reference connection, which is smooth and vanishes
//! identically for constant multiples of the reference metric.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField, SymTensor2Field};
use crate::grid::{constant_components, reference_connection, ChartGrid, FaceMode, FrameConnection, Node, Parity};
use crate::linalg::{self, nsym, sym_index, Mat, ZERO};

pub type Christoffel = [[[f64; 4]; 4]; 4];

/// Inverse metric, volume density and difference tensor `C^a_{bc}`
/// (node-major, slot `a*ns + sym(b,c)`).
#[derive(Clone, Debug)]
pub struct Connection {
    pub grid: Arc<ChartGrid>,
    pub ginv: Vec<f64>,
    /// `√det g` including the reference frame volume factor.
    pub sqrt_det: Vec<f64>,
    pub diff: Vec<f64>,
}

/// Parities of every packed symmetric slot `(i, j)`.
pub fn sym_parities(grid: &ChartGrid) -> Vec<Parity> {
    let n = grid.dim();
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| grid.parity(&[i, j])).collect()
}

impl Connection {
    pub fn new(g: &MetricField) -> Result<Self> {
        let grid = g.grid().clone();
        let n = grid.dim();
        let ns = nsym(n);
        let parities = sym_parities(&grid);
        let len = grid.len();
        let mut ginv = vec![0.0; len * ns];
        let mut sqrt_det = vec![0.0; len];
        let mut diff = vec![0.0; len * n * ns];
        let data = &g.tensor.data;
        let flat = constant_components(data, ns, &parities);
        let failures: Vec<Option<usize>> = ginv
            .par_chunks_mut(ns)
            .zip(sqrt_det.par_iter_mut())
            .zip(diff.par_chunks_mut(n * ns))
            .enumerate()
            .map(|(lin, ((gi, sd), cd))| {
                let nd = grid.node(lin);
                let m = linalg::unpack(n, &data[lin * ns..(lin + 1) * ns]);
                let Some((inv, det)) = linalg::inverse(n, &m) else {
                    return Some(lin);
                };
                if !(det > 0.0) {
                    return Some(lin);
                }
                linalg::pack(n, &inv, gi);
                let fr = grid.frame(&nd);
                *sd = det.sqrt() * fr.scale[..n].iter().product::<f64>();
                let gam0 = reference_connection(n, &fr);
                // cov[b][c][d] = (∇̊_b g)_cd
                let mut cov = [ZERO; 4];
                for (b, cb) in cov.iter_mut().enumerate().take(n) {
                    for c in 0..n {
                        for d in c..n {
                            let s = sym_index(n, c, d);
                            let mut v = if flat[s] {
                                0.0
                            } else {
                                grid.diff_at(data, ns, s, &parities[s], b, 1, FaceMode::OneSided, &nd) / fr.scale[b]
                            };
                            for e in 0..n {
                                v -= gam0[e][b][c] * m[e][d] + gam0[e][b][d] * m[c][e];
                            }
                            cb[c][d] = v;
                            cb[d][c] = v;
                        }
                    }
                }
                for b in 0..n {
                    for c in b..n {
                        let mut low = [0.0; 4];
                        for (d, l) in low.iter_mut().enumerate().take(n) {
                            *l = 0.5 * (cov[b][c][d] + cov[c][b][d] - cov[d][b][c]);
                        }
                        for a in 0..n {
                            let mut v = 0.0;
                            for d in 0..n {
                                v += inv[a][d] * low[d];
                            }
                            cd[a * ns + sym_index(n, b, c)] = v;
                        }
                    }
                }
                None
            })
            .collect();
        if let Some(node) = failures.into_iter().flatten().next() {
            let min_eigenvalue = linalg::min_eigenvalue(n, &g.at(node));
            return Err(Error::NotPositiveDefinite { node, min_eigenvalue });
        }
        Ok(Connection { grid, ginv, sqrt_det, diff })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn ginv_at(&self, node: usize) -> Mat {
        let ns = nsym(self.dim());
        linalg::unpack(self.dim(), &self.ginv[node * ns..(node + 1) * ns])
    }

    /// Difference tensor `C^a_{bc}` at a node, indexed `[a][b][c]`.
    pub fn diff_at(&self, node: usize) -> Christoffel {
        let n = self.dim();
        let ns = nsym(n);
        let base = node * n * ns;
        let mut out = [[[0.0; 4]; 4]; 4];
        for (a, oa) in out.iter_mut().enumerate().take(n) {
            for b in 0..n {
                for c in 0..n {
                    oa[b][c] = self.diff[base + a * ns + sym_index(n, b, c)];
                }
            }
        }
        out
    }

    /// Reference connection coefficients at a node.
    pub fn reference_at(&self, node: usize) -> FrameConnection {
        reference_connection(self.dim(), &self.grid.frame(&self.grid.node(node)))
    }

    /// Frame connection coefficients `Γ^c_{ab} = ⟨∇_{e_a} e_b, e^c⟩`, indexed `[c][a][b]`.
    pub fn gamma2_at(&self, node: usize) -> Christoffel {
        let n = self.dim();
        let mut g = self.reference_at(node);
        let c = self.diff_at(node);
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    g[k][a][b] += c[k][a][b];
                }
            }
        }
        g
    }

    /// Lowered coefficients `Γ_{c,ab} = g_cd Γ^d_{ab}`.
    pub fn gamma1_at(&self, node: usize, g: &Mat) -> Christoffel {
        lower(self.dim(), g, &self.gamma2_at(node))
    }

    /// Connection coefficient `Γ^k_{ij}` as a field.
    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> ScalarField {
        let values = (0..self.grid.len()).map(|l| self.gamma2_at(l)[k][i][j]).collect();
        ScalarField { grid: self.grid.clone(), values }
    }
}

pub fn lower(n: usize, g: &Mat, up: &Christoffel) -> Christoffel {
    let mut out = [[[0.0; 4]; 4]; 4];
    for c in 0..n {
        for d in 0..n {
            let gcd = g[c][d];
            if gcd == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[c][i][j] += gcd * up[d][i][j];
                }
            }
        }
    }
    out
}

/// Component derivative of a scalar field along an axis.
pub fn differentiate(f: &ScalarField, axis: usize, order: usize, mode: FaceMode) -> Result<ScalarField> {
    f.grid.check_axis(axis)?;
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidParameter(format!("derivative order {order} not in {{1, 2}}")));
    }
    let values = f.grid.diff_component(&f.values, 1, 0, &Parity::EVEN, axis, order, mode);
    Ok(ScalarField { grid: f.grid.clone(), values })
}

/// Component-wise coordinate derivative of the frame components of a symmetric tensor field.
pub fn differentiate_tensor(t: &SymTensor2Field, axis: usize, order: usize) -> Result<SymTensor2Field> {
    let grid = &t.grid;
    grid.check_axis(axis)?;
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidParameter(format!("derivative order {order} not in {{1, 2}}")));
    }
    let ns = nsym(grid.dim());
    let parities = sym_parities(grid);
    let mut data = vec![0.0; t.data.len()];
    data.par_chunks_mut(ns).enumerate().for_each(|(lin, out)| {
        let nd = grid.node(lin);
        for (s, o) in out.iter_mut().enumerate() {
            *o = grid.diff_at(&t.data, ns, s, &parities[s], axis, order, FaceMode::OneSided, &nd);
        }
    });
    Ok(SymTensor2Field { grid: grid.clone(), data })
}

/// First and second frame derivatives of a scalar, node-major:
/// `d[lin*n + i] = e_i u`, `dd[lin*ns + sym(i,j)] = e_i e_j u` for `i ≤ j`.
pub fn partials(u: &ScalarField, mode: FaceMode) -> (Vec<f64>, Vec<f64>) {
    let grid = &u.grid;
    let n = grid.dim();
    let ns = nsym(n);
    let len = grid.len();
    let mut d = vec![0.0; len * n];
    d.par_chunks_mut(n).enumerate().for_each(|(lin, out)| {
        let nd = grid.node(lin);
        let fr = grid.frame(&nd);
        for (i, o) in out.iter_mut().enumerate() {
            *o = grid.diff_at(&u.values, 1, 0, &Parity::EVEN, i, 1, mode, &nd) / fr.scale[i];
        }
    });
    let par: Vec<Parity> = (0..n).map(|j| grid.parity(&[j])).collect();
    let mut dd = vec![0.0; len * ns];
    dd.par_chunks_mut(ns).enumerate().for_each(|(lin, out)| {
        let nd = grid.node(lin);
        let fr = grid.frame(&nd);
        for i in 0..n {
            let di = fr.scale[i];
            out[sym_index(n, i, i)] = grid.diff_at(&u.values, 1, 0, &Parity::EVEN, i, 2, mode, &nd) / (di * di);
            for j in i + 1..n {
                // e_i of the stored e_j u
                out[sym_index(n, i, j)] = grid.diff_at(&d, n, j, &par[j], i, 1, mode, &nd) / di;
            }
        }
    });
    (d, dd)
}

/// Covariant first and second derivatives of a scalar.
#[derive(Clone, Debug)]
pub struct ScalarDerivatives {
    pub grid: Arc<ChartGrid>,
    /// `e_i u`, node-major.
    pub gradient: Vec<f64>,
    /// `∇²u_ij`, packed node-major.
    pub hessian: Vec<f64>,
}

impl ScalarDerivatives {
    pub fn new(conn: &Connection, u: &ScalarField, mode: FaceMode) -> Result<Self> {
        same_grid(&conn.grid, &u.grid)?;
        let n = conn.dim();
        let ns = nsym(n);
        let (d, mut dd) = partials(u, mode);
        dd.par_chunks_mut(ns).enumerate().for_each(|(lin, h)| {
            let gam = conn.gamma2_at(lin);
            let du = &d[lin * n..(lin + 1) * n];
            // i ≤ j matches the order in which e_i e_j u was formed
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for (k, duk) in du.iter().enumerate() {
                        s += gam[k][i][j] * duk;
                    }
                    h[sym_index(n, i, j)] -= s;
                }
            }
        });
        Ok(ScalarDerivatives { grid: conn.grid.clone(), gradient: d, hessian: dd })
    }

    pub fn du(&self, node: usize) -> [f64; 4] {
        let n = self.grid.dim();
        let mut out = [0.0; 4];
        out[..n].copy_from_slice(&self.gradient[node * n..(node + 1) * n]);
        out
    }

    pub fn hess(&self, node: usize) -> Mat {
        let n = self.grid.dim();
        let ns = nsym(n);
        linalg::unpack(n, &self.hessian[node * ns..(node + 1) * ns])
    }

    pub fn hessian_field(&self) -> SymTensor2Field {
        SymTensor2Field { grid: self.grid.clone(), data: self.hessian.clone() }
    }

    /// `Δu = g^{ij} ∇²u_ij`.
    pub fn laplacian(&self, conn: &Connection) -> ScalarField {
        let n = self.grid.dim();
        let values = (0..self.grid.len())
            .map(|l| linalg::trace_with(n, &conn.ginv_at(l), &self.hess(l)))
            .collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// `|∇u|² = g^{ij} ∂_i u ∂_j u`.
    pub fn grad_norm2(&self, conn: &Connection) -> ScalarField {
        let values = (0..self.grid.len()).map(|l| quad(self.grid.dim(), &conn.ginv_at(l), &self.du(l))).collect();
        ScalarField { grid: self.grid.clone(), values }
    }
}

/// `a^{ij} x_i x_j`.
pub fn quad(n: usize, a: &Mat, x: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * x[i] * x[j];
        }
    }
    s
}

/// Laplacian of a scalar field.
pub fn laplacian(conn: &Connection, u: &ScalarField, mode: FaceMode) -> Result<ScalarField> {
    Ok(ScalarDerivatives::new(conn, u, mode)?.laplacian(conn))
}

/// Divergence `e_i V^i + Γ^i_{ij} V^j` of a vector field given node-major in frame components.
pub fn divergence(conn: &Connection, v: &[f64], mode: FaceMode) -> Result<ScalarField> {
    let grid = &conn.grid;
    let n = grid.dim();
    if v.len() != grid.len() * n {
        return Err(Error::GridMismatch);
    }
    let par: Vec<Parity> = (0..n).map(|i| grid.parity(&[i])).collect();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|lin| {
            let nd: Node = grid.node(lin);
            let fr = grid.frame(&nd);
            let gam = conn.gamma2_at(lin);
            let mut s = 0.0;
            for i in 0..n {
                s += grid.diff_at(v, n, i, &par[i], i, 1, mode, &nd) / fr.scale[i];
                for j in 0..n {
                    s += gam[i][i][j] * v[lin * n + j];
                }
            }
            s
        })
        .collect();
    Ok(ScalarField { grid: grid.clone(), values })
}

/// Coordinate volume density `√det g` at every node.
pub fn volume_density(g: &MetricField) -> Vec<f64> {
    let n = g.dim();
    let grid = g.grid();
    (0..grid.len())
        .map(|l| {
            let d = linalg::inverse(n, &g.at(l)).map(|(_, d)| d.max(0.0).sqrt()).unwrap_or(0.0);
            d * grid.frame_volume(&grid.node(l))
        })
        .collect()
}

/// `∫ s dV_g`: corrected midpoint rule, summed in node order.
pub fn integrate_volume(s: &ScalarField, g: &MetricField) -> Result<f64> {
    same_grid(&s.grid, g.grid())?;
    Ok(integrate_with_density(&s.values, &volume_density(g), g.grid()))
}

pub fn integrate_with_density(s: &[f64], density: &[f64], grid: &ChartGrid) -> f64 {
    let w = grid.cell_weights();
    let mut acc = 0.0;
    for i in 0..s.len() {
        acc += s[i] * density[i] * w[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_catalog_manifold, CatalogId, Resolution};
    use std::f64::consts::PI;

    #[test]
    fn volume_of_three_sphere() {
        let (grid, g) = build_catalog_manifold(&CatalogId::RoundSphere { n: 3, r: 1.0 }, &Resolution::new(32)).unwrap();
        let one = ScalarField::constant(grid.clone(), 1.0);
        let v = integrate_volume(&one, &g).unwrap();
        assert!((v / (2.0 * PI * PI) - 1.0).abs() < 1e-6, "{v}");
        let zero = ScalarField::constant(grid, 0.0);
        assert_eq!(integrate_volume(&zero, &g).unwrap(), 0.0);
    }

    #[test]
    fn laplacian_of_first_harmonic_on_three_sphere() {
        let (grid, g) = build_catalog_manifold(&CatalogId::RoundSphere { n: 3, r: 1.0 }, &Resolution::new(24).with_azimuth(32))
                .unwrap();
        let conn = Connection::new(&g).unwrap();
        // x₂ = sin θ₁ sin θ₂ cos φ
        let u = ScalarField::from_fn(grid.clone(), |x| x[0].sin() * x[1].sin() * x[2].cos());
        let lap = laplacian(&conn, &u, FaceMode::OneSided).unwrap();
        let err = lap.values.iter().zip(&u.values).map(|(l, v)| (l + 3.0 * v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn second_derivative_of_constant_is_exactly_zero() {
        let (grid, _) = build_catalog_manifold(&CatalogId::Hemisphere { n: 3, r: 1.0 }, &Resolution::new(16)).unwrap();
        let c = ScalarField::constant(grid, 2.5);
        for axis in 0..3 {
            let d = differentiate(&c, axis, 2, FaceMode::OneSided).unwrap();
            assert_eq!(d.max_abs(), 0.0);
        }
        assert!(matches!(differentiate(&c, 3, 1, FaceMode::OneSided), Err(Error::AxisOutOfRange { .. })));
    }
}
