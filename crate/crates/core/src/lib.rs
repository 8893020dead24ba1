//! Identification of an interior material interface from transient heat
//! observations, posed as PDE-constrained shape optimization on the unit
//! square `(-1,1)^2`.
//!
//! The crate provides two gradient representations over the same forward
//! model (implicit-Euler heat transport with a piecewise-constant
//! diffusivity):
//!
//! * a volume formulation, where the shape derivative is assembled as a
//!   source term of a linear-elasticity mesh deformation whose bilinear
//!   form doubles as the Riemannian metric, and
//! * a surface formulation, where a Hadamard density on the interface is
//!   smoothed by a curve Laplacian and extended as a Dirichlet boundary
//!   condition of the same elasticity operator.
//!
//! On top of both sits a limited-memory BFGS driver with vector transport
//! across deformed meshes, plus a CLI harness ([`harness`]) that runs the
//! circle-identification experiment end to end.

pub mod error;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod optimizer;
pub mod parabolic;
pub mod shape_calculus;
pub mod steklov;
pub mod surface;

pub use error::{Error, Result};
