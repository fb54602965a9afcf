//! Rotationally symmetric conformal factors on sphere and hemisphere charts.
//!
//! The background is sampled on a full chart grid with coarse tangential axes
//! and read off along one radial line: frame metric, the connection
//! coefficients `Γ^0_ab`, Ricci, scalar curvature and `|W|`. For a radial `u`
//! only `e_0 u = u'` is nonzero, so `∇²u_ab = δ_a0 δ_b0 u'' − Γ^0_ab u'`.
//! Derivatives along the radial axis use centered stencils with even
//! reflection across both ends (pole regularity, and the Neumann condition at
//! the equator of a hemisphere), so radial data are assumed even about both
//! ends of the axis.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::catalog::{build_catalog_manifold, CatalogId, Resolution};
use crate::curvature::{compute_curvature, schouten_t, CurvatureBundle};
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField};
use crate::grid::ChartGrid;
use crate::linalg::{self, Mat, ZERO};
use crate::operators::Geometry;
use crate::stencil::{centered_weights, fornberg, STENCIL_RADIUS, STENCIL_WIDTH};
use crate::symmetric::Spectrum;

/// Tangential and azimuthal node count of the background grid.
pub const TANGENTIAL_NODES: usize = 8;

#[derive(Clone, Debug)]
pub struct RadialModel {
    pub id: CatalogId,
    pub dim: usize,
    pub theta: Vec<f64>,
    pub h: f64,
    pub has_boundary: bool,
    pub grid: Arc<ChartGrid>,
    pub g: MetricField,
    /// Full-grid node of each radial sample.
    pub line: Vec<usize>,
    pub metric: Vec<Mat>,
    pub ginv: Vec<Mat>,
    /// `Γ^0_ab`.
    pub gamma0: Vec<Mat>,
    pub ricci: Vec<Mat>,
    pub scalar: Vec<f64>,
    pub weyl_norm: Vec<f64>,
    /// `∫ f dV ≈ Σ weight_i f_i` for radial `f`.
    pub weight: Vec<f64>,
    w1: [f64; STENCIL_WIDTH],
    w2: [f64; STENCIL_WIDTH],
}

/// Pointwise `A^t_u` and its elementary symmetric functions.
#[derive(Clone, Copy, Debug)]
pub struct NodeState {
    pub a: Mat,
    pub sigma1: f64,
    pub sigma2: f64,
    pub du: f64,
}

impl RadialModel {
    pub fn new(id: &CatalogId, nodes: usize) -> Result<Self> {
        let res = Resolution::new(nodes).with_tangential(TANGENTIAL_NODES).with_azimuth(TANGENTIAL_NODES);
        let (grid, g) = build_catalog_manifold(id, &res)?;
        if !grid.is_polar() {
            return Err(Error::InvalidParameter(format!("{} has no radial axis", id.label())));
        }
        let curv = compute_curvature(&g)?;
        Self::from_curvature(id, grid, g, &curv)
    }

    /// The model together with the full-grid geometry it was read from.
    pub fn with_geometry(id: &CatalogId, nodes: usize) -> Result<(Self, Geometry)> {
        let res = Resolution::new(nodes).with_tangential(TANGENTIAL_NODES).with_azimuth(TANGENTIAL_NODES);
        let (grid, g) = build_catalog_manifold(id, &res)?;
        if !grid.is_polar() {
            return Err(Error::InvalidParameter(format!("{} has no radial axis", id.label())));
        }
        let geo = Geometry::new(&g)?;
        let model = Self::from_curvature(id, grid, g, &geo.curvature)?;
        Ok((model, geo))
    }

    fn from_curvature(id: &CatalogId, grid: Arc<ChartGrid>, g: MetricField, curv: &CurvatureBundle) -> Result<Self> {
        let dim = grid.dim();
        let ax = grid.axis(0);
        let nodes = ax.nodes;
        let mut idx = vec![0usize; dim];
        for (k, i) in idx.iter_mut().enumerate().skip(1) {
            if k < dim - 1 {
                *i = grid.axis(k).nodes / 2;
            }
        }
        let line: Vec<usize> = (0..nodes)
            .map(|i| {
                idx[0] = i;
                grid.linear(&idx)
            })
            .collect();
        let metric: Vec<Mat> = line.iter().map(|&l| g.at(l)).collect();
        let ginv: Vec<Mat> = line.iter().map(|&l| curv.connection.ginv_at(l)).collect();
        let gamma0: Vec<Mat> = line.iter().map(|&l| curv.connection.gamma2_at(l)[0]).collect();
        let ricci = line.iter().map(|&l| curv.ricci_at(l)).collect();
        let scalar = line.iter().map(|&l| curv.scalar_at(l)).collect();
        let weyl_norm = line.iter().map(|&l| curv.norms_at(l).0.max(0.0).sqrt()).collect();
        // tangential factor integrated exactly: |S^{n−1}| sin^{n−1}θ
        let sphere = if dim == 3 { 4.0 * PI } else { 2.0 * PI * PI };
        let theta = ax.coords();
        // plain midpoint: smooth in i, and exact enough for data even about both ends
        let h = ax.spacing();
        let weight = theta
            .iter()
            .zip(&metric)
            .map(|(x, g)| {
                let det = linalg::inverse(dim, g).map(|(_, d)| d.max(0.0).sqrt()).unwrap_or(0.0);
                h * sphere * x.sin().powi(dim as i32 - 1) * det
            })
            .collect();
        Ok(RadialModel {
            id: id.clone(),
            dim,
            theta,
            h: ax.spacing(),
            has_boundary: grid.boundary_axis().is_some(),
            grid,
            g,
            line,
            metric,
            ginv,
            gamma0,
            ricci,
            scalar,
            weyl_norm,
            weight,
            w1: centered_weights(1),
            w2: centered_weights(2),
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Index of the sample feeding stencil point `i + k` after reflection.
    pub fn reflect(&self, j: isize) -> usize {
        let n = self.len() as isize;
        let r = if j < 0 {
            -1 - j
        } else if j >= n {
            2 * n - 1 - j
        } else {
            j
        };
        r as usize
    }

    /// `(u', u'')` at node `i`.
    pub fn derivatives_at(&self, u: &[f64], i: usize) -> (f64, f64) {
        let c = u[i];
        let (mut d1, mut d2) = (0.0, 0.0);
        for p in 0..STENCIL_WIDTH {
            let j = self.reflect(i as isize + p as isize - STENCIL_RADIUS as isize);
            let v = u[j] - c;
            d1 += self.w1[p] * v;
            d2 += self.w2[p] * v;
        }
        (d1 / self.h, d2 / (self.h * self.h))
    }

    pub fn derivatives(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (0..self.len()).map(|i| self.derivatives_at(u, i)).unzip()
    }

    /// `∇²u` from `u'`, `u''` at node `i`.
    pub fn hessian(&self, i: usize, d1: f64, d2: f64) -> Mat {
        let n = self.dim;
        let mut h = ZERO;
        for a in 0..n {
            for b in 0..n {
                h[a][b] = -self.gamma0[i][a][b] * d1;
            }
        }
        h[0][0] += d2;
        // Γ^0 is symmetric up to truncation error
        for a in 0..n {
            for b in 0..a {
                let v = 0.5 * (h[a][b] + h[b][a]);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        h
    }

    /// `A^t_g` of the background at node `i`.
    pub fn schouten_t(&self, i: usize, t: f64) -> Mat {
        schouten_t(self.dim, t, &self.ricci[i], self.scalar[i], &self.metric[i])
    }

    /// `A^t_u = A^t + ∇²u + ((1−t)/(n−2))Δu g + du⊗du − ((2−t)/2)|∇u|² g`.
    pub fn transformed(&self, i: usize, t: f64, d1: f64, d2: f64) -> Mat {
        let n = self.dim;
        let nf = n as f64;
        let g = &self.metric[i];
        let h = self.hessian(i, d1, d2);
        let lap = linalg::trace_with(n, &self.ginv[i], &h);
        let grad2 = self.ginv[i][0][0] * d1 * d1;
        let mut a = self.schouten_t(i, t);
        for p in 0..n {
            for q in 0..n {
                a[p][q] += h[p][q] + (1.0 - t) / (nf - 2.0) * lap * g[p][q] - (2.0 - t) / 2.0 * grad2 * g[p][q];
            }
        }
        a[0][0] += d1 * d1;
        a
    }

    pub fn node_state(&self, u: &[f64], i: usize, t: f64) -> NodeState {
        let (d1, d2) = self.derivatives_at(u, i);
        self.node_state_from(i, t, d1, d2)
    }

    pub fn node_state_from(&self, i: usize, t: f64, d1: f64, d2: f64) -> NodeState {
        let a = self.transformed(i, t, d1, d2);
        let e = Spectrum::of_pencil(self.dim, &a, &self.metric[i])
            .map(|s| s.elementary())
            .unwrap_or_else(|| vec![f64::NAN; self.dim + 1]);
        NodeState { a, sigma1: e[1], sigma2: e[2], du: d1 }
    }

    /// `|∇u|_g` at node `i` from `u'`.
    pub fn grad_norm(&self, i: usize, d1: f64) -> f64 {
        (self.ginv[i][0][0] * d1 * d1).max(0.0).sqrt()
    }

    /// Radial samples broadcast to the full background grid.
    pub fn broadcast(&self, u: &[f64]) -> ScalarField {
        let nodes = self.len();
        let stride = self.grid.stride(0);
        let values = (0..self.grid.len()).map(|l| u[(l / stride) % nodes]).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// Samples of `f(θ)` on the radial nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.theta.iter().map(|&x| f(x)).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weight).map(|(a, w)| a * w).sum()
    }

    /// Full-grid quadrature of a radial integrand divided by `integrate`.
    pub fn grid_scale(&self) -> f64 {
        let full = crate::calculus::integrate_volume(&ScalarField::constant(self.grid.clone(), 1.0), &self.g)
            .expect("metric lives on the model grid");
        full / self.integrate(&vec![1.0; self.len()])
    }

    /// Weights `τ` with `u(face) ≈ Σ τ_i u_i`, from the centered interpolant
    /// across the reflected end.
    pub fn face_weights(&self) -> Vec<f64> {
        let n = self.len();
        let xs: Vec<f64> = (0..STENCIL_WIDTH - 1).map(|k| k as f64 - (STENCIL_RADIUS as f64 - 0.5)).collect();
        let c = fornberg(0.0, &xs, 0);
        let mut tau = vec![0.0; n];
        for (k, ck) in c[0].iter().enumerate() {
            // offset k − 3.5 cells from the face; nodes past it mirror back
            let j = (n as isize - STENCIL_RADIUS as isize + k as isize) as isize;
            tau[self.reflect(j)] += ck;
        }
        tau
    }
}
