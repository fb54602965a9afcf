use thiserror::Error;

/// Errors raised by the toolkit. Numerical failures carry the offending node
/// so callers can report it without re-running the computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown catalog manifold `{0}`")]
    UnknownManifold(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resolution {nodes} on axis `{axis}` is below the minimum of {min}")]
    ResolutionTooLow { axis: String, nodes: usize, min: usize },

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("the manifold has no boundary")]
    NoBoundary,

    #[error("operation requires dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("metric is not positive definite at node {node} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { node: usize, min_eigenvalue: f64 },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("scalar curvature is not positive at node {node} (R = {value:e})")]
    NonPositiveScalarCurvature { node: usize, value: f64 },

    #[error("Neumann condition violated: max |du/dn| = {max_normal_derivative:e}")]
    NeumannViolation { max_normal_derivative: f64 },

    #[error("boundary is not totally geodesic: max |L| = {max_second_fundamental_form:e}")]
    NotTotallyGeodesic { max_second_fundamental_form: f64 },

    #[error("cone condition violated at node {node} (margin {margin:e})")]
    ConeViolation { node: usize, margin: f64 },

    #[error("no admissible path start found above {floor}")]
    NoAdmissibleDelta { floor: f64 },

    #[error("continuation step underflow; last accepted t = {last_t}")]
    StepUnderflow { last_t: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },

    #[error("spectral precondition failed: {0}")]
    SpectrumPrecondition(String),

    #[error("inequality `{name}` violated at node {node} (margin {margin:e})")]
    InequalityViolated { name: String, node: usize, margin: f64 },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
