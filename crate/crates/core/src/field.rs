//! Sampled fields on chart grids and the JSON snapshot format.
//!
//! Snapshot layout: `{"grid": {"axes": [...]}, "components": [[...], ...]}`
//! with one inner array per tensor component (packed upper triangle for
//! symmetric tensors) in row-major node order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChartGrid, GridSpec};
use crate::linalg::{self, nsym, Mat};

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<ChartGrid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<ChartGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Arc<ChartGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        ScalarField { grid, values }
    }

    /// Samples a function of the node coordinates.
    pub fn from_fn(grid: Arc<ChartGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|l| f(&grid.coords(l)[..grid.dim()])).collect();
        ScalarField { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { grid: self.grid.spec(), components: vec![self.values.clone()] }
    }
}

/// Symmetric 2-tensor field, node-major with the packed upper triangle per node.
#[derive(Clone, Debug)]
pub struct SymTensor2Field {
    pub grid: Arc<ChartGrid>,
    pub data: Vec<f64>,
}

impl SymTensor2Field {
    pub fn zeros(grid: Arc<ChartGrid>) -> Self {
        let data = vec![0.0; grid.len() * nsym(grid.dim())];
        SymTensor2Field { grid, data }
    }

    pub fn from_fn(grid: Arc<ChartGrid>, f: impl Fn(&[f64]) -> Mat) -> Self {
        let n = grid.dim();
        let ns = nsym(n);
        let mut data = vec![0.0; grid.len() * ns];
        for (l, chunk) in data.chunks_mut(ns).enumerate() {
            let x = grid.coords(l);
            linalg::pack(n, &f(&x[..n]), chunk);
        }
        SymTensor2Field { grid, data }
    }

    /// Builds a field from a function of the node index.
    pub fn from_fn_nodes(grid: Arc<ChartGrid>, f: impl Fn(usize) -> Mat) -> Self {
        let n = grid.dim();
        let ns = nsym(n);
        let mut data = vec![0.0; grid.len() * ns];
        for (l, chunk) in data.chunks_mut(ns).enumerate() {
            linalg::pack(n, &f(l), chunk);
        }
        SymTensor2Field { grid, data }
    }

    pub fn ncomp(&self) -> usize {
        nsym(self.grid.dim())
    }

    pub fn at(&self, node: usize) -> Mat {
        let ns = self.ncomp();
        linalg::unpack(self.grid.dim(), &self.data[node * ns..(node + 1) * ns])
    }

    pub fn component(&self, i: usize, j: usize) -> ScalarField {
        let n = self.grid.dim();
        let ns = self.ncomp();
        let s = linalg::sym_index(n, i, j);
        let values = self.data.iter().skip(s).step_by(ns).copied().collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn scaled(&self, s: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, &s.grid)?;
        let ns = self.ncomp();
        let mut data = self.data.clone();
        for (chunk, f) in data.chunks_mut(ns).zip(&s.values) {
            chunk.iter_mut().for_each(|c| *c *= f);
        }
        Ok(SymTensor2Field { grid: self.grid.clone(), data })
    }

    pub fn snapshot(&self) -> Snapshot {
        let ns = self.ncomp();
        let components = (0..ns).map(|c| self.data.iter().skip(c).step_by(ns).copied().collect()).collect();
        Snapshot { grid: self.grid.spec(), components }
    }

    pub fn from_snapshot(snap: Snapshot) -> Result<Self> {
        let grid = Arc::new(snap.grid.build()?);
        let ns = nsym(grid.dim());
        if snap.components.len() != ns || snap.components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Snapshot("component count or length does not match the grid".into()));
        }
        let mut data = vec![0.0; grid.len() * ns];
        for (c, comp) in snap.components.iter().enumerate() {
            for (l, v) in comp.iter().enumerate() {
                data[l * ns + c] = *v;
            }
        }
        Ok(SymTensor2Field { grid, data })
    }
}

/// A sampled Riemannian metric.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub tensor: SymTensor2Field,
    /// Catalog identifier of the generator, or "derived".
    pub source: String,
}

/// Smallest admissible metric eigenvalue.
pub const MIN_METRIC_EIGENVALUE: f64 = 1e-10;

impl MetricField {
    /// Wraps a tensor field after checking positive definiteness at every node
    /// (smallest eigenvalue of the unit-diagonal rescaling above 10⁻¹⁰).
    pub fn new(tensor: SymTensor2Field, source: &str) -> Result<Self> {
        let n = tensor.grid.dim();
        for node in 0..tensor.grid.len() {
            let mut m = tensor.at(node);
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node });
            }
            // Polar charts shrink some coordinate lengths to near zero at the
            // poles, so definiteness is judged on the Jacobi-scaled matrix.
            let d: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
            let scaled_ok = d.iter().all(|v| *v > 0.0) && {
                for i in 0..n {
                    for j in 0..n {
                        m[i][j] /= (d[i] * d[j]).sqrt();
                    }
                    m[i][i] -= MIN_METRIC_EIGENVALUE;
                }
                linalg::cholesky(n, &m).is_some()
            };
            if !scaled_ok {
                let min_eigenvalue = linalg::min_eigenvalue(n, &tensor.at(node));
                return Err(Error::NotPositiveDefinite { node, min_eigenvalue });
            }
        }
        Ok(MetricField { tensor, source: source.to_string() })
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.tensor.grid
    }

    pub fn dim(&self) -> usize {
        self.tensor.grid.dim()
    }

    pub fn at(&self, node: usize) -> Mat {
        self.tensor.at(node)
    }
}

/// Wire form of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

pub fn same_grid(a: &Arc<ChartGrid>, b: &Arc<ChartGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}
