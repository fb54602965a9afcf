//! Numerical conformal geometry on gridded 3- and 4-manifolds with boundary.

pub mod boundary;
pub mod calculus;
pub mod catalog;
pub mod conformal;
pub mod curvature;
pub mod error;
pub mod field;
pub mod grid;
pub mod identities;
pub mod json;
pub mod linalg;
pub mod minimizer;
pub mod operators;
pub mod pinching;
pub mod radial;
pub mod scalar;
pub mod solver;
pub mod stencil;
pub mod symmetric;

pub use error::{Error, Result};
