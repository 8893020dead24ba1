//! P1 (linear triangle) finite element assembly and the sparse linear
//! algebra shared by every PDE solve in the crate.

mod assemble;
mod interp;
mod pcg;
mod sparse;

pub use assemble::{assemble_mass, assemble_stiffness, P1Element};
pub use interp::{point_interpolate, PointLocator};
pub use pcg::{pcg_solve, PcgStats, DEFAULT_PCG_TOL};
pub use sparse::{CsrBuilder, DirichletSet, SparseSpd};
