//! Consistent mass and piecewise-constant-coefficient stiffness assembly
//! on linear triangles.

use crate::error::{Error, Result};
use crate::fem::sparse::{CsrBuilder, SparseSpd};
use crate::mesh::{signed_area, Region, TriMesh};

/// Geometry of one linear triangle: area and the constant basis gradients.
#[derive(Debug, Clone, Copy)]
pub struct P1Element {
    pub area: f64,
    /// `grad[a]` is the gradient of the hat function of local vertex `a`.
    pub grad: [[f64; 2]; 3],
}

impl P1Element {
    pub fn new(coords: [[f64; 2]; 3]) -> Self {
        let area = signed_area(coords[0], coords[1], coords[2]);
        let inv = 1.0 / (2.0 * area);
        let mut grad = [[0.0; 2]; 3];
        for a in 0..3 {
            let b = coords[(a + 1) % 3];
            let c = coords[(a + 2) % 3];
            grad[a] = [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv];
        }
        P1Element { area, grad }
    }

    pub fn from_mesh(mesh: &TriMesh, t: usize) -> Self {
        P1Element::new(mesh.tri_coords(t))
    }

    /// Gradient of the P1 interpolant of nodal values `u`.
    pub fn field_gradient(&self, u: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for a in 0..3 {
            g[0] += u[a] * self.grad[a][0];
            g[1] += u[a] * self.grad[a][1];
        }
        g
    }

    /// Element mass matrix, `area/12 * [[2,1,1],[1,2,1],[1,1,2]]`.
    pub fn mass(&self) -> [[f64; 3]; 3] {
        let s = self.area / 12.0;
        let mut m = [[s; 3]; 3];
        for a in 0..3 {
            m[a][a] = 2.0 * s;
        }
        m
    }

    /// Exact integral over the element of the product of two P1 functions
    /// given by nodal values.
    pub fn integrate_product(&self, u: [f64; 3], v: [f64; 3]) -> f64 {
        let m = self.mass();
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                acc += u[a] * m[a][b] * v[b];
            }
        }
        acc
    }
}

/// Consistent P1 mass matrix. Row sums are the nodal patch areas divided
/// by three; the total sum equals the domain area.
pub fn assemble_mass(mesh: &TriMesh) -> SparseSpd {
    let mut builder = CsrBuilder::new(mesh.num_vertices());
    for t in 0..mesh.num_triangles() {
        let el = P1Element::from_mesh(mesh, t);
        let m = el.mass();
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                builder.add(tri[a], tri[b], m[a][b]);
            }
        }
    }
    builder.build()
}

/// Stiffness matrix with diffusivity `k1` on exterior and `k2` on interior
/// elements. Piecewise-constant coefficients keep the interface
/// transmission conditions implicit in the conforming discretization.
pub fn assemble_stiffness(mesh: &TriMesh, k1: f64, k2: f64) -> Result<SparseSpd> {
    if !(k1 > 0.0) || !(k2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diffusivities must be positive, got k1={k1}, k2={k2}"
        )));
    }
    let mut builder = CsrBuilder::new(mesh.num_vertices());
    for t in 0..mesh.num_triangles() {
        let el = P1Element::from_mesh(mesh, t);
        let k = match mesh.region[t] {
            Region::Exterior => k1,
            Region::Interior => k2,
        };
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                let g = el.grad[a][0] * el.grad[b][0] + el.grad[a][1] * el.grad[b][1];
                builder.add(tri[a], tri[b], k * el.area * g);
            }
        }
    }
    Ok(builder.build())
}
