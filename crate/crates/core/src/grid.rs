//! Structured chart grids with polar and periodic topology.
//!
//! Nodes are stored row-major (last axis fastest). Axes that touch a
//! coordinate pole are cell-centered so that no node sits on the singular
//! set; stencils that reach past a pole are folded back through the chart's
//! antipodal identification (reflect the polar angle, mirror every later
//! polar angle and rotate the azimuth by half a turn).
//!
//! Polar charts carry the orthonormal frame of the unit round metric,
//! `e_a = D_a⁻¹ ∂_a` with `D_a = Π_{j<a} sin x_j`. Tensor data on such grids
//! are frame components, and ghost parities are those of frame components.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::{centered_weights, fornberg, STENCIL_RADIUS, STENCIL_WIDTH};

/// Topology of one coordinate axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    /// Wraps around; nodes at `a + i h`.
    Periodic,
    /// Polar angle with a coordinate pole at both ends.
    PoleAdjacent,
    /// Polar angle with a pole at the start and the manifold boundary at the end.
    BoundedBoundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub nodes: usize,
    pub kind: AxisKind,
}

impl Axis {
    pub fn new(name: &str, start: f64, end: f64, nodes: usize, kind: AxisKind) -> Self {
        Axis { name: name.to_string(), start, end, nodes, kind }
    }

    pub fn spacing(&self) -> f64 {
        (self.end - self.start) / self.nodes as f64
    }

    /// Coordinate of node `i`.
    pub fn coord(&self, i: usize) -> f64 {
        let h = self.spacing();
        match self.kind {
            AxisKind::Periodic => self.start + i as f64 * h,
            _ => self.start + (i as f64 + 0.5) * h,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.coord(i)).collect()
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == AxisKind::Periodic
    }

    /// Quadrature weights along this axis.
    pub fn weights(&self) -> Vec<f64> {
        match self.kind {
            AxisKind::Periodic => vec![self.spacing(); self.nodes],
            _ => crate::stencil::corrected_midpoint_weights(self.nodes, self.spacing()),
        }
    }
}

/// How stencils treat the boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceMode {
    /// One-sided stencils from interior nodes.
    OneSided,
    /// Even reflection across the face (fields with vanishing normal derivative).
    Even,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ghost {
    None,
    Pole,
    Face,
}

#[derive(Clone, Debug)]
struct Row {
    target: [usize; STENCIL_WIDTH],
    ghost: [Ghost; STENCIL_WIDTH],
    w1: [f64; STENCIL_WIDTH],
    w2: [f64; STENCIL_WIDTH],
}

#[derive(Clone, Debug)]
struct AxisTables {
    one_sided: Vec<Row>,
    even: Vec<Row>,
    // Weights at the face coordinate from the last STENCIL_WIDTH nodes.
    face: Option<[[f64; STENCIL_WIDTH]; 3]>,
}

/// Sign flips for a tensor component under the two ghost reflections of each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Parity {
    pole: [f64; 4],
    face: [f64; 4],
}

impl Parity {
    pub const EVEN: Parity = Parity { pole: [1.0; 4], face: [1.0; 4] };

    pub fn is_even(&self) -> bool {
        self.pole.iter().chain(&self.face).all(|s| *s > 0.0)
    }
}

/// Per component of node-major data: true when the component is the same
/// value everywhere and extends smoothly through every ghost, so that all
/// of its derivatives vanish exactly.
pub fn constant_components(data: &[f64], stride: usize, parities: &[Parity]) -> Vec<bool> {
    (0..stride)
        .map(|c| {
            let v0 = data[c];
            (v0 == 0.0 || parities[c].is_even()) && data.iter().skip(c).step_by(stride).all(|v| *v == v0)
        })
        .collect()
}

/// Reference frame data at one node: scale factors `D_a` and `κ_a = cot x_a / D_a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub scale: [f64; 4],
    pub kappa: [f64; 4],
}

/// Connection coefficients `Γ[c][a][b] = ⟨∇_{e_a} e_b, e_c⟩` of an orthonormal frame.
pub type FrameConnection = [[[f64; 4]; 4]; 4];

/// Levi-Civita coefficients of the reference frame. For `x < y` the only
/// nonzero entries are `⟨∇_{e_y} e_y, e_x⟩ = −κ_x` and `⟨∇_{e_y} e_x, e_y⟩ = κ_x`.
pub fn reference_connection(n: usize, frame: &Frame) -> FrameConnection {
    let mut g = [[[0.0; 4]; 4]; 4];
    for x in 0..n {
        let k = frame.kappa[x];
        if k == 0.0 {
            continue;
        }
        for y in x + 1..n {
            g[x][y][y] = -k;
            g[y][y][x] = k;
        }
    }
    g
}

/// Position of a node: linear index plus multi-index.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub lin: usize,
    pub idx: [usize; 4],
}

#[derive(Clone, Debug)]
pub struct ChartGrid {
    axes: Vec<Axis>,
    strides: [usize; 4],
    len: usize,
    tables: Vec<AxisTables>,
    weights: Vec<f64>,
    // (sin, cos) of every node coordinate on polar axes
    trig: Vec<Vec<(f64, f64)>>,
    polar: bool,
}

impl PartialEq for ChartGrid {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes
    }
}

/// Minimum node count per axis.
pub const MIN_NODES: usize = 8;

impl ChartGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        let dim = axes.len();
        if !(1..=4).contains(&dim) {
            return Err(Error::InvalidParameter(format!("grid dimension {dim} not supported")));
        }
        for ax in &axes {
            let min = if ax.kind == AxisKind::BoundedBoundary { STENCIL_WIDTH } else { MIN_NODES };
            if ax.nodes < min {
                return Err(Error::ResolutionTooLow { axis: ax.name.clone(), nodes: ax.nodes, min });
            }
            if !(ax.end > ax.start) || !ax.start.is_finite() || !ax.end.is_finite() {
                return Err(Error::InvalidParameter(format!("axis `{}` has an empty interval", ax.name)));
            }
        }
        let bounded = axes.iter().filter(|a| a.kind == AxisKind::BoundedBoundary).count();
        if bounded > 1 {
            return Err(Error::InvalidParameter("at most one bounded-boundary axis".into()));
        }
        let has_pole = axes.iter().any(|a| !a.is_periodic());
        if has_pole {
            let last = axes.last().unwrap();
            if !last.is_periodic() || last.nodes % 2 != 0 {
                return Err(Error::InvalidParameter(
                    "polar charts need an even-sized periodic azimuth as the last axis".into(),
                ));
            }
            if axes[..dim - 1].iter().any(|a| a.is_periodic()) {
                return Err(Error::InvalidParameter("only the last axis of a polar chart may be periodic".into()));
            }
            for ax in &axes {
                let ok = match ax.kind {
                    AxisKind::Periodic => ax.start == 0.0 && (ax.end - 2.0 * PI).abs() < 1e-12,
                    AxisKind::PoleAdjacent => ax.start == 0.0 && (ax.end - PI).abs() < 1e-12,
                    AxisKind::BoundedBoundary => ax.start == 0.0 && ax.end <= PI,
                };
                if !ok {
                    return Err(Error::InvalidParameter(format!("axis `{}` is not a round-sphere angle", ax.name)));
                }
            }
        }
        let mut strides = [0usize; 4];
        let mut s = 1;
        for k in (0..dim).rev() {
            strides[k] = s;
            s *= axes[k].nodes;
        }
        let tables = axes.iter().map(build_tables).collect();
        let trig = axes.iter().map(trig_table).collect();
        let mut grid =
            ChartGrid { axes, strides, len: s, tables, weights: Vec::new(), trig, polar: has_pole };
        let w: Vec<Vec<f64>> = grid.axes.iter().map(|a| a.weights()).collect();
        grid.weights = (0..grid.len)
            .map(|lin| {
                let nd = grid.node(lin);
                (0..dim).map(|k| w[k][nd.idx[k]]).product()
            })
            .collect();
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Index of the bounded-boundary axis, if any.
    pub fn boundary_axis(&self) -> Option<usize> {
        self.axes.iter().position(|a| a.kind == AxisKind::BoundedBoundary)
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim() {
            Err(Error::AxisOutOfRange { axis, dim: self.dim() })
        } else {
            Ok(())
        }
    }

    pub fn node(&self, lin: usize) -> Node {
        let mut idx = [0usize; 4];
        let mut r = lin;
        for (k, slot) in idx.iter_mut().enumerate().take(self.dim()) {
            *slot = r / self.strides[k];
            r %= self.strides[k];
        }
        Node { lin, idx }
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of a node.
    pub fn coords(&self, lin: usize) -> [f64; 4] {
        let nd = self.node(lin);
        let mut x = [0.0; 4];
        for k in 0..self.dim() {
            x[k] = self.axes[k].coord(nd.idx[k]);
        }
        x
    }

    /// Product quadrature weight of every node, in node order.
    pub fn cell_weights(&self) -> &[f64] {
        &self.weights
    }

    /// True for charts of the round sphere (any non-periodic axis).
    pub fn is_polar(&self) -> bool {
        self.polar
    }

    /// Sectional curvature of the reference metric.
    pub fn reference_curvature(&self) -> f64 {
        if self.polar {
            1.0
        } else {
            0.0
        }
    }

    /// Reference frame at a node.
    #[inline]
    pub fn frame(&self, node: &Node) -> Frame {
        let mut scale = [1.0; 4];
        let mut kappa = [0.0; 4];
        if self.polar {
            let mut d = 1.0;
            for k in 0..self.dim() {
                scale[k] = d;
                if !self.axes[k].is_periodic() {
                    let (s, c) = self.trig[k][node.idx[k]];
                    kappa[k] = c / (s * d);
                    d *= s;
                }
            }
        }
        Frame { scale, kappa }
    }

    /// Coordinate volume factor `Π_a D_a` of the reference frame.
    pub fn frame_volume(&self, node: &Node) -> f64 {
        let f = self.frame(node);
        f.scale[..self.dim()].iter().product()
    }

    /// Ghost parity of a frame component whose indices live on the given axes.
    pub fn parity(&self, index_axes: &[usize]) -> Parity {
        let mut p = Parity::EVEN;
        for k in 0..self.dim() {
            for &i in index_axes {
                if i == k || (i > k && self.axes[i].is_periodic()) {
                    p.pole[k] = -p.pole[k];
                }
                if i == k {
                    p.face[k] = -p.face[k];
                }
            }
        }
        p
    }

    fn neighbor(&self, node: &Node, axis: usize, target: usize, ghost: Ghost) -> usize {
        match ghost {
            Ghost::None | Ghost::Face => {
                node.lin + target * self.strides[axis] - node.idx[axis] * self.strides[axis]
            }
            Ghost::Pole => {
                let mut lin = target * self.strides[axis];
                for k in 0..self.dim() {
                    if k == axis {
                        continue;
                    }
                    let n = self.axes[k].nodes;
                    let i = if k < axis {
                        node.idx[k]
                    } else if self.axes[k].is_periodic() {
                        (node.idx[k] + n / 2) % n
                    } else {
                        n - 1 - node.idx[k]
                    };
                    lin += i * self.strides[k];
                }
                lin
            }
        }
    }

    /// Derivative of order 1 or 2 along `axis` of node-major data with `stride`
    /// components per node, component `comp`, evaluated at one node.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    pub fn diff_at(
        &self,
        data: &[f64],
        stride: usize,
        comp: usize,
        parity: &Parity,
        axis: usize,
        order: usize,
        mode: FaceMode,
        node: &Node,
    ) -> f64 {
        let tab = &self.tables[axis];
        let row = match mode {
            FaceMode::OneSided => &tab.one_sided[node.idx[axis]],
            FaceMode::Even => &tab.even[node.idx[axis]],
        };
        let w = if order == 1 { &row.w1 } else { &row.w2 };
        let h = self.axes[axis].spacing();
        let scale = if order == 1 { 1.0 / h } else { 1.0 / (h * h) };
        // weights sum to zero; differencing against the centre value makes
        // data that is constant along the axis differentiate to exactly zero
        let centre = data[node.lin * stride + comp];
        let mut acc = 0.0;
        for p in 0..STENCIL_WIDTH {
            if w[p] == 0.0 {
                continue;
            }
            let nb = self.neighbor(node, axis, row.target[p], row.ghost[p]);
            let sign = match row.ghost[p] {
                Ghost::None => 1.0,
                Ghost::Pole => parity.pole[axis],
                Ghost::Face => parity.face[axis],
            };
            acc += w[p] * (sign * data[nb * stride + comp] - centre);
        }
        acc * scale
    }

    /// Whole-field derivative of one component.
    #[allow(clippy::too_many_arguments)]
    pub fn diff_component(
        &self,
        data: &[f64],
        stride: usize,
        comp: usize,
        parity: &Parity,
        axis: usize,
        order: usize,
        mode: FaceMode,
    ) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.len)
            .into_par_iter()
            .map(|lin| {
                let nd = self.node(lin);
                self.diff_at(data, stride, comp, parity, axis, order, mode, &nd)
            })
            .collect()
    }

    /// Weights at the face coordinate for value, first and second normal
    /// derivative, applied to the last `STENCIL_WIDTH` nodes of the bounded axis.
    pub fn face_weights(&self) -> Option<(usize, [[f64; STENCIL_WIDTH]; 3])> {
        let k = self.boundary_axis()?;
        self.tables[k].face.map(|w| (k, w))
    }

    /// Tangential grid of the boundary face.
    pub fn boundary(&self) -> Result<BoundaryGrid> {
        let k = self.boundary_axis().ok_or(Error::NoBoundary)?;
        let axes: Vec<Axis> = self
            .axes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, a)| a.clone())
            .collect();
        let grid = ChartGrid::new(axes)?;
        Ok(BoundaryGrid { grid: std::sync::Arc::new(grid), normal_axis: k })
    }

    /// Parent node index of boundary node `b` shifted `back` cells inward from the face.
    pub fn face_node(&self, normal_axis: usize, b: &Node, back: usize) -> usize {
        let mut lin = 0;
        let mut j = 0;
        for k in 0..self.dim() {
            let i = if k == normal_axis {
                self.axes[k].nodes - 1 - back
            } else {
                let i = b.idx[j];
                j += 1;
                i
            };
            lin += i * self.strides[k];
        }
        lin
    }

    /// Serializable description of the grid.
    pub fn spec(&self) -> GridSpec {
        GridSpec { axes: self.axes.clone() }
    }
}

/// Wire form of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn build(self) -> Result<ChartGrid> {
        ChartGrid::new(self.axes)
    }
}

/// The face of a bounded chart, as its own (n−1)-dimensional grid.
#[derive(Clone, Debug)]
pub struct BoundaryGrid {
    pub grid: std::sync::Arc<ChartGrid>,
    /// Axis of the parent grid normal to the face.
    pub normal_axis: usize,
}

fn build_tables(ax: &Axis) -> AxisTables {
    let n = ax.nodes;
    let r = STENCIL_RADIUS as isize;
    let c1 = centered_weights(1);
    let c2 = centered_weights(2);
    let mut one_sided = Vec::with_capacity(n);
    let mut even = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Row {
            target: [0; STENCIL_WIDTH],
            ghost: [Ghost::None; STENCIL_WIDTH],
            w1: c1,
            w2: c2,
        };
        let mut even_row = row.clone();
        let mut near_face = false;
        for p in 0..STENCIL_WIDTH {
            let j = i as isize + p as isize - r;
            let (t, g) = map_index(ax.kind, n, j);
            row.target[p] = t;
            row.ghost[p] = g;
            even_row.target[p] = t;
            even_row.ghost[p] = g;
            if g == Ghost::Face {
                near_face = true;
            }
        }
        if near_face {
            // one-sided: last STENCIL_WIDTH nodes, evaluated at node i
            let first = n - STENCIL_WIDTH;
            let xs: Vec<f64> = (first..n).map(|m| m as f64).collect();
            let w = fornberg(i as f64, &xs, 2);
            for p in 0..STENCIL_WIDTH {
                row.target[p] = first + p;
                row.ghost[p] = Ghost::None;
                row.w1[p] = w[1][p];
                row.w2[p] = w[2][p];
            }
        }
        one_sided.push(row);
        even.push(even_row);
    }
    let face = if ax.kind == AxisKind::BoundedBoundary {
        let first = n - STENCIL_WIDTH;
        let xs: Vec<f64> = (first..n).map(|m| m as f64).collect();
        let w = fornberg(n as f64 - 0.5, &xs, 2);
        let h = ax.spacing();
        let mut out = [[0.0; STENCIL_WIDTH]; 3];
        for p in 0..STENCIL_WIDTH {
            out[0][p] = w[0][p];
            out[1][p] = w[1][p] / h;
            out[2][p] = w[2][p] / (h * h);
        }
        Some(out)
    } else {
        None
    };
    AxisTables { one_sided, even, face }
}

fn trig_table(ax: &Axis) -> Vec<(f64, f64)> {
    let n = ax.nodes;
    (0..n)
        .map(|i| match ax.kind {
            AxisKind::Periodic => (0.0, 1.0),
            // mirror-exact across the equator
            AxisKind::PoleAdjacent if 2 * i >= n => {
                let x = ax.coord(n - 1 - i);
                (x.sin(), -x.cos())
            }
            _ => {
                let x = ax.coord(i);
                (x.sin(), x.cos())
            }
        })
        .collect()
}

fn map_index(kind: AxisKind, n: usize, j: isize) -> (usize, Ghost) {
    let ni = n as isize;
    match kind {
        AxisKind::Periodic => (j.rem_euclid(ni) as usize, Ghost::None),
        AxisKind::PoleAdjacent | AxisKind::BoundedBoundary => {
            if j < 0 {
                ((-1 - j) as usize, Ghost::Pole)
            } else if j >= ni {
                if kind == AxisKind::PoleAdjacent {
                    ((2 * ni - 1 - j) as usize, Ghost::Pole)
                } else {
                    // one-sided rows overwrite this; even rows keep the reflection
                    ((2 * ni - 1 - j) as usize, Ghost::Face)
                }
            } else {
                (j as usize, Ghost::None)
            }
        }
    }
}
