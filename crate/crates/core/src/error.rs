//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// A deformation or profile morph flipped an element. Carries the index
    /// and signed area of the worst offender.
    #[error("triangle {index} inverted (signed area {area:.6e})")]
    InvertedTriangle { index: usize, area: f64 },

    #[error("radial profile leaves the unit square: r({theta:.6}) = {r:.6}")]
    ProfileOutOfBounds { theta: f64, r: f64 },

    #[error("pcg exceeded {iterations} iterations (relative residual {residual:.3e})")]
    PcgMaxIter { iterations: usize, residual: f64 },

    #[error("pcg breakdown, operator not positive definite (p^T A p = {curvature:.3e})")]
    PcgNotSpd { curvature: f64 },

    #[error("point ({x:.8}, {y:.8}) lies outside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    /// Field handed to an operation that belongs to a different mesh or
    /// time grid.
    #[error("mismatched operands: {0}")]
    Mismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
