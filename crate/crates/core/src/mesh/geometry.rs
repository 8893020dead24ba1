//! Discrete geometry of the interface polyline: outward normals, lumped
//! arc lengths and turning-angle curvature.

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Per-vertex geometry record of a closed counter-clockwise polyline.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceVertexGeometry {
    /// Unit normal pointing out of the enclosed region (angle bisector of
    /// the two adjacent edge normals).
    pub normal: [f64; 2],
    /// Half the summed length of the two adjacent edges.
    pub arc_length: f64,
    /// Turning angle divided by the lumped arc length; positive for a
    /// counter-clockwise convex vertex, so a circle has `kappa = 1/r`.
    pub curvature: f64,
}

/// Geometry of a closed polyline given counter-clockwise. Errors on
/// zero-length edges.
pub fn polyline_geometry(points: &[[f64; 2]]) -> Result<Vec<InterfaceVertexGeometry>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidMesh("polyline needs at least 3 vertices".into()));
    }
    let mut tangents = Vec::with_capacity(n);
    let mut lengths = Vec::with_capacity(n);
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len == 0.0 {
            return Err(Error::InvalidMesh(format!("zero-length polyline edge at vertex {i}")));
        }
        tangents.push([d[0] / len, d[1] / len]);
        lengths.push(len);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t_prev = tangents[(i + n - 1) % n];
        let t_next = tangents[i];
        // Edge normals for a CCW loop point to the right of the tangent.
        let n_prev = [t_prev[1], -t_prev[0]];
        let n_next = [t_next[1], -t_next[0]];
        let mut normal = [n_prev[0] + n_next[0], n_prev[1] + n_next[1]];
        let norm = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidMesh(format!(
                "polyline reverses direction at vertex {i} (cusp)"
            )));
        }
        normal = [normal[0] / norm, normal[1] / norm];
        let turning = (t_prev[0] * t_next[1] - t_prev[1] * t_next[0])
            .atan2(t_prev[0] * t_next[0] + t_prev[1] * t_next[1]);
        let arc_length = 0.5 * (lengths[(i + n - 1) % n] + lengths[i]);
        out.push(InterfaceVertexGeometry { normal, arc_length, curvature: turning / arc_length });
    }
    Ok(out)
}

/// Geometry records for the mesh interface loop, one per loop vertex in
/// loop order.
pub fn interface_geometry(mesh: &TriMesh) -> Result<Vec<InterfaceVertexGeometry>> {
    let points: Vec<[f64; 2]> = mesh.interface_loop.iter().map(|&v| mesh.vertices[v]).collect();
    polyline_geometry(&points)
}
