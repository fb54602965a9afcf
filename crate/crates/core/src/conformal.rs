//! Conformal factors and conformally rebuilt metrics.

use serde::{Deserialize, Serialize};

use crate::boundary::Face;
use crate::calculus::ScalarDerivatives;
use crate::curvature::{compute_curvature, schouten_t};
use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField};
use crate::grid::FaceMode;
use crate::linalg::{self, ZERO};

/// Largest one-sided normal derivative accepted for a Neumann factor.
pub const NEUMANN_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `g̃ = e^{2w} g`
    Expand,
    /// `g̃ = e^{−2w} g`
    Shrink,
}

#[derive(Clone, Debug)]
pub struct ConformalFactor {
    pub w: ScalarField,
    pub convention: Convention,
    pub neumann: bool,
}

impl ConformalFactor {
    pub fn expand(w: ScalarField) -> Self {
        ConformalFactor { w, convention: Convention::Expand, neumann: false }
    }

    pub fn shrink(w: ScalarField) -> Self {
        ConformalFactor { w, convention: Convention::Shrink, neumann: false }
    }

    /// Marks the factor as Neumann after checking `|∂₀w| ≤ NEUMANN_TOLERANCE`
    /// on the boundary face. On a closed chart the flag is set unconditionally.
    pub fn with_neumann(mut self) -> Result<Self> {
        let d = max_face_derivative(&self.w)?;
        if d > NEUMANN_TOLERANCE {
            return Err(Error::NeumannViolation { max_normal_derivative: d });
        }
        self.neumann = true;
        Ok(self)
    }

    /// `u` with `g̃ = e^{2u} g`.
    pub fn expand_exponent(&self) -> ScalarField {
        match self.convention {
            Convention::Expand => self.w.clone(),
            Convention::Shrink => self.w.map(|v| -v),
        }
    }

    /// `u` with `g̃ = e^{−2u} g`.
    pub fn shrink_exponent(&self) -> ScalarField {
        match self.convention {
            Convention::Expand => self.w.map(|v| -v),
            Convention::Shrink => self.w.clone(),
        }
    }
}

/// `max |∂₀ f|` over the boundary face, 0 on closed charts. The catalog
/// metrics are diagonal in the frame, so this is the normal derivative up to
/// the length of `e₀`.
pub fn max_face_derivative(f: &ScalarField) -> Result<f64> {
    if f.grid.boundary_axis().is_none() {
        return Ok(0.0);
    }
    let face = Face::new(&f.grid)?;
    Ok(face.trace_normal(f)?.max_abs())
}

pub fn conformal_rebuild(g: &MetricField, w: &ConformalFactor) -> Result<MetricField> {
    same_grid(g.grid(), &w.w.grid)?;
    let u = w.expand_exponent();
    let scale = u.map(|v| (2.0 * v).exp());
    let tensor = g.tensor.scaled(&scale)?;
    MetricField::new(tensor, "derived")
}

/// Direct curvature of the rebuilt metric against the transformation law
/// `Ã^t = A^t + ∇²u + ((1−t)/(n−2))Δu g + du⊗du − ((2−t)/2)|∇u|² g`
/// with `u` the shrink exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformCheck {
    pub t: f64,
    pub max_discrepancy: f64,
    pub scale: f64,
    pub relative: f64,
    pub worst_node: usize,
}

pub fn transformation_check(g: &MetricField, w: &ConformalFactor, t: f64) -> Result<TransformCheck> {
    let n = g.dim();
    let nf = n as f64;
    let rebuilt = conformal_rebuild(g, w)?;
    let direct = compute_curvature(&rebuilt)?;
    let curv = compute_curvature(g)?;
    let u = w.shrink_exponent();
    let ders = ScalarDerivatives::new(&curv.connection, &u, FaceMode::OneSided)?;
    let (mut worst, mut max_disc, mut scale) = (0, 0.0f64, 0.0f64);
    for node in 0..g.grid().len() {
        let gm = g.at(node);
        let ginv = curv.connection.ginv_at(node);
        let at = schouten_t(n, t, &curv.ricci_at(node), curv.scalar_at(node), &gm);
        let h = ders.hess(node);
        let du = ders.du(node);
        let lap = linalg::trace_with(n, &ginv, &h);
        let grad2 = crate::calculus::quad(n, &ginv, &du);
        let gt = rebuilt.at(node);
        let direct_at = schouten_t(n, t, &direct.ricci_at(node), direct.scalar_at(node), &gt);
        let mut diff = ZERO;
        let mut formula = ZERO;
        for i in 0..n {
            for j in 0..n {
                formula[i][j] = at[i][j] + h[i][j] + (1.0 - t) / (nf - 2.0) * lap * gm[i][j] + du[i] * du[j]
                    - (2.0 - t) / 2.0 * grad2 * gm[i][j];
                diff[i][j] = direct_at[i][j] - formula[i][j];
            }
        }
        let d = linalg::inner(n, &ginv, &diff, &diff).max(0.0).sqrt();
        scale = scale.max(linalg::inner(n, &ginv, &formula, &formula).max(0.0).sqrt());
        if d > max_disc {
            max_disc = d;
            worst = node;
        }
    }
    let relative = if max_disc == 0.0 { 0.0 } else { max_disc / scale.max(f64::MIN_POSITIVE) };
    Ok(TransformCheck { t, max_discrepancy: max_disc, scale, relative, worst_node: worst })
}
