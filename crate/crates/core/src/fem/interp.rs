//! Point location and P1 interpolation, used to transfer observation data
//! between non-matching grids.
//!
//! Location walks the triangle adjacency starting from the previous hit
//! and falls back to a brute-force nearest-element scan; both paths are
//! deterministic.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::mesh::{signed_area, TriMesh};

/// Points at most this far outside every triangle snap to the nearest one;
/// farther points are errors.
const SNAP_TOL: f64 = 1e-10;

pub struct PointLocator<'a> {
    mesh: &'a TriMesh,
    last: Cell<usize>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        PointLocator { mesh, last: Cell::new(0) }
    }

    fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.mesh.tri_coords(t);
        let area = signed_area(a, b, c);
        [
            signed_area(p, b, c) / area,
            signed_area(a, p, c) / area,
            signed_area(a, b, p) / area,
        ]
    }

    /// Containing (or nearest within tolerance) triangle and clamped
    /// barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let nt = self.mesh.num_triangles();
        let mut t = self.last.get().min(nt - 1);
        for _ in 0..nt {
            let lambda = self.barycentric(t, p);
            let (kmin, &lmin) = lambda
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap();
            if lmin >= -1e-12 {
                self.last.set(t);
                return Ok((t, clamp(lambda)));
            }
            match self.mesh.topology().neighbor(t, kmin) {
                Some(next) => t = next,
                None => break,
            }
        }
        // Brute force: nearest triangle by Euclidean distance.
        let mut best: Option<(f64, usize)> = None;
        for t in 0..nt {
            let d = self.distance_to_triangle(t, p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, t));
            }
            if d == 0.0 {
                break;
            }
        }
        let (d, t) = best.unwrap();
        if d <= SNAP_TOL {
            self.last.set(t);
            Ok((t, clamp(self.barycentric(t, p))))
        } else {
            Err(Error::PointOutsideMesh { x: p[0], y: p[1] })
        }
    }

    fn distance_to_triangle(&self, t: usize, p: [f64; 2]) -> f64 {
        let lambda = self.barycentric(t, p);
        if lambda.iter().all(|&l| l >= 0.0) {
            return 0.0;
        }
        let coords = self.mesh.tri_coords(t);
        let mut best = f64::INFINITY;
        for k in 0..3 {
            best = best.min(point_segment_distance(p, coords[k], coords[(k + 1) % 3]));
        }
        best
    }
}

fn clamp(lambda: [f64; 3]) -> [f64; 3] {
    let mut out = lambda.map(|l| l.max(0.0));
    let sum: f64 = out.iter().sum();
    for l in &mut out {
        *l /= sum;
    }
    out
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Evaluates a nodal field at the query points by barycentric
/// interpolation in the containing triangle.
pub fn point_interpolate(mesh: &TriMesh, field: &[f64], points: &[[f64; 2]]) -> Result<Vec<f64>> {
    if field.len() != mesh.num_vertices() {
        return Err(Error::Mismatch(format!(
            "field has {} values for {} vertices",
            field.len(),
            mesh.num_vertices()
        )));
    }
    let locator = PointLocator::new(mesh);
    points
        .iter()
        .map(|&p| {
            let (t, lambda) = locator.locate(p)?;
            let tri = mesh.triangles[t];
            Ok(lambda[0] * field[tri[0]] + lambda[1] * field[tri[1]] + lambda[2] * field[tri[2]])
        })
        .collect()
}
