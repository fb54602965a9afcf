//! Closed-form model metrics sampled on chart grids.
//!
//! Metrics are stored in the reference frame of their chart, so the round
//! metric of radius r is the constant `r² δ`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{MetricField, SymTensor2Field};
use crate::grid::{Axis, AxisKind, ChartGrid};
use crate::linalg::ZERO;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CatalogId {
    RoundSphere { n: usize, r: f64 },
    Hemisphere { n: usize, r: f64 },
    FlatTorus { n: usize },
    /// `e^{2w} g_base` with `w = Σ_k c_k cos^k θ₁`.
    ConformalRadial { base: Box<CatalogId>, coefficients: Vec<f64> },
}

impl CatalogId {
    /// Parses names like `round-sphere4`, `hemisphere3`, `flat-torus4`.
    pub fn parse(name: &str, radius: f64) -> Result<Self> {
        let (stem, n) = name.split_at(name.len().saturating_sub(1));
        let n: usize = n.parse().map_err(|_| Error::UnknownManifold(name.to_string()))?;
        if !(3..=4).contains(&n) {
            return Err(Error::UnknownManifold(name.to_string()));
        }
        match stem {
            "round-sphere" | "sphere" => Ok(CatalogId::RoundSphere { n, r: radius }),
            "hemisphere" => Ok(CatalogId::Hemisphere { n, r: radius }),
            "flat-torus" | "torus" => Ok(CatalogId::FlatTorus { n }),
            _ => Err(Error::UnknownManifold(name.to_string())),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CatalogId::RoundSphere { n, .. } | CatalogId::Hemisphere { n, .. } | CatalogId::FlatTorus { n } => *n,
            CatalogId::ConformalRadial { base, .. } => base.dim(),
        }
    }

    pub fn has_boundary(&self) -> bool {
        match self {
            CatalogId::Hemisphere { .. } => true,
            CatalogId::ConformalRadial { base, .. } => base.has_boundary(),
            _ => false,
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        match self {
            CatalogId::RoundSphere { .. } => 2,
            CatalogId::Hemisphere { .. } => 1,
            CatalogId::FlatTorus { .. } => 0,
            CatalogId::ConformalRadial { base, .. } => base.euler_characteristic(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CatalogId::RoundSphere { n, .. } => format!("round-sphere{n}"),
            CatalogId::Hemisphere { n, .. } => format!("hemisphere{n}"),
            CatalogId::FlatTorus { n } => format!("flat-torus{n}"),
            CatalogId::ConformalRadial { base, .. } => format!("conformal-radial({})", base.label()),
        }
    }
}

/// Grid resolution. `n` is the node count on the first (radial/polar) axis;
/// the other polar axes and the azimuth have their own counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub n: usize,
    pub n_tangential: Option<usize>,
    pub n_azimuth: Option<usize>,
}

impl Resolution {
    pub fn new(n: usize) -> Self {
        Resolution { n, n_tangential: None, n_azimuth: None }
    }

    pub fn with_tangential(mut self, nt: usize) -> Self {
        self.n_tangential = Some(nt);
        self
    }

    pub fn with_azimuth(mut self, na: usize) -> Self {
        self.n_azimuth = Some(na);
        self
    }
}

fn sphere_axes(dim: usize, first_end: f64, first_kind: AxisKind, res: &Resolution) -> Vec<Axis> {
    let nt = res.n_tangential.unwrap_or(res.n);
    let na = res.n_azimuth.unwrap_or(if dim == 4 { 8 } else { 16 });
    let mut axes = vec![Axis::new("theta1", 0.0, first_end, res.n, first_kind)];
    for k in 2..dim {
        axes.push(Axis::new(&format!("theta{k}"), 0.0, PI, nt, AxisKind::PoleAdjacent));
    }
    axes.push(Axis::new("phi", 0.0, 2.0 * PI, na, AxisKind::Periodic));
    axes
}

/// `c δ` in the first `dim` slots.
pub fn scalar_metric(dim: usize, c: f64) -> [[f64; 4]; 4] {
    let mut g = ZERO;
    for (k, row) in g.iter_mut().enumerate().take(dim) {
        row[k] = c;
    }
    g
}

/// Builds the grid and the sampled metric of a catalog manifold.
pub fn build_catalog_manifold(id: &CatalogId, res: &Resolution) -> Result<(Arc<ChartGrid>, MetricField)> {
    let dim = id.dim();
    if !(3..=4).contains(&dim) {
        return Err(Error::InvalidParameter(format!("dimension {dim} not in {{3, 4}}")));
    }
    let (axes, metric): (Vec<Axis>, Box<dyn Fn(&[f64]) -> [[f64; 4]; 4]>) = base_chart(id, res)?;
    let grid = Arc::new(ChartGrid::new(axes)?);
    let tensor = SymTensor2Field::from_fn(grid.clone(), metric);
    let source = match id {
        CatalogId::ConformalRadial { .. } => "conformal-radial",
        CatalogId::RoundSphere { .. } => "round-sphere",
        CatalogId::Hemisphere { .. } => "hemisphere",
        CatalogId::FlatTorus { .. } => "flat-torus",
    };
    let g = MetricField::new(tensor, source)?;
    Ok((grid, g))
}

type MetricFn = Box<dyn Fn(&[f64]) -> [[f64; 4]; 4]>;

fn base_chart(id: &CatalogId, res: &Resolution) -> Result<(Vec<Axis>, MetricFn)> {
    match id {
        CatalogId::RoundSphere { n, r } | CatalogId::Hemisphere { n, r } => {
            if !(*r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
            }
            let (end, kind) = if matches!(id, CatalogId::Hemisphere { .. }) {
                (PI / 2.0, AxisKind::BoundedBoundary)
            } else {
                (PI, AxisKind::PoleAdjacent)
            };
            let (n, r) = (*n, *r);
            Ok((sphere_axes(n, end, kind, res), Box::new(move |_| scalar_metric(n, r * r))))
        }
        CatalogId::FlatTorus { n } => {
            let n = *n;
            let axes = (0..n)
                .map(|k| Axis::new(&format!("x{}", k + 1), 0.0, 2.0 * PI, res.n, AxisKind::Periodic))
                .collect();
            Ok((axes, Box::new(move |_| scalar_metric(n, 1.0))))
        }
        CatalogId::ConformalRadial { base, coefficients } => {
            if matches!(**base, CatalogId::ConformalRadial { .. }) {
                return Err(Error::InvalidParameter("nested conformal-radial metrics".into()));
            }
            let (axes, g0) = base_chart(base, res)?;
            let c = coefficients.clone();
            Ok((
                axes,
                Box::new(move |x| {
                    let w = radial_polynomial(&c, x[0]);
                    let e = (2.0 * w).exp();
                    let mut g = g0(x);
                    g.iter_mut().flatten().for_each(|v| *v *= e);
                    g
                }),
            ))
        }
    }
}

/// `Σ_k c_k cos^k θ`.
pub fn radial_polynomial(c: &[f64], theta: f64) -> f64 {
    let x = theta.cos();
    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
}
