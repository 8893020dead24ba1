//! Template-based generator for interface-conforming meshes.
//!
//! The domain is star-shaped around the origin, so it is meshed as a stack
//! of concentric vertex rings: a fan around the center, circular rings up
//! to the interface ring at radius 0.5, then rings blending from the
//! circle to the outer square. Adjacent rings with different vertex counts
//! are stitched by an angular sweep. The template is finally morphed
//! radially so the interface ring lands on the requested profile while the
//! outer square stays put.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryEdge, BoundaryTag, Region, TriMesh};

/// Radius of the square boundary in direction `theta`.
fn square_radius(theta: f64) -> f64 {
    1.0 / theta.cos().abs().max(theta.sin().abs())
}

/// Interface radius of the template before morphing.
const TEMPLATE_RADIUS: f64 = 0.5;

struct Ring {
    /// Vertex indices sorted by ascending angle in `(-pi, pi]`.
    vertices: Vec<usize>,
    angles: Vec<f64>,
}

fn circle_ring(points: &mut Vec<[f64; 2]>, radius: f64, count: usize) -> Ring {
    let mut vertices = Vec::with_capacity(count);
    let mut angles = Vec::with_capacity(count);
    for k in 0..count {
        // Angles in (-pi, pi], ascending.
        let theta = -PI + 2.0 * PI * (k as f64 + 0.5) / count as f64;
        vertices.push(points.len());
        angles.push(theta);
        points.push([radius * theta.cos(), radius * theta.sin()]);
    }
    Ring { vertices, angles }
}

/// Ring interpolating between the interface circle and the outer square:
/// at blend `s` the radius in direction `theta` is
/// `r0 + s * (square_radius(theta) - r0)`.
fn blended_ring(points: &mut Vec<[f64; 2]>, s: f64, count: usize) -> Ring {
    let mut vertices = Vec::with_capacity(count);
    let mut angles = Vec::with_capacity(count);
    for k in 0..count {
        let theta = -PI + 2.0 * PI * (k as f64 + 0.5) / count as f64;
        let radius = TEMPLATE_RADIUS + s * (square_radius(theta) - TEMPLATE_RADIUS);
        vertices.push(points.len());
        angles.push(theta);
        points.push([radius * theta.cos(), radius * theta.sin()]);
    }
    Ring { vertices, angles }
}

/// Outermost ring: the square itself, corners included, `n_side` segments
/// per side.
fn square_ring(points: &mut Vec<[f64; 2]>, n_side: usize) -> Ring {
    let corners = [[1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]];
    let mut positions = Vec::with_capacity(4 * n_side);
    for c in 0..4 {
        let a = corners[c];
        let b = corners[(c + 1) % 4];
        for i in 0..n_side {
            let t = i as f64 / n_side as f64;
            positions.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&i, &j| {
        let ai = positions[i][1].atan2(positions[i][0]);
        let aj = positions[j][1].atan2(positions[j][0]);
        ai.partial_cmp(&aj).unwrap()
    });
    let mut vertices = Vec::with_capacity(positions.len());
    let mut angles = Vec::with_capacity(positions.len());
    for &i in &order {
        let p = positions[i];
        vertices.push(points.len());
        angles.push(p[1].atan2(p[0]));
        points.push(p);
    }
    Ring { vertices, angles }
}

/// Stitches two rings (inner first) with an angular sweep, producing
/// `inner.len() + outer.len()` counter-clockwise triangles.
fn zip_rings(triangles: &mut Vec<[usize; 3]>, inner: &Ring, outer: &Ring) {
    let na = inner.vertices.len();
    let nb = outer.vertices.len();
    debug_assert!(na >= 3 && nb >= 3);

    // Start the outer walk at the vertex angularly closest to the first
    // inner vertex.
    let a0 = inner.angles[0];
    let mut j0 = 0;
    let mut best = f64::INFINITY;
    for (j, &beta) in outer.angles.iter().enumerate() {
        let mut d = (beta - a0).rem_euclid(2.0 * PI);
        if d > PI {
            d = 2.0 * PI - d;
        }
        if d < best {
            best = d;
            j0 = j;
        }
    }

    // Unwrapped walk angles on a shared scale: position k of a walk is the
    // start angle plus the accumulated positive angular increments, so both
    // sequences ascend from near `a0` to one full turn above it.
    let cumulative = |angles: &[f64], start: usize, anchor: f64| -> Vec<f64> {
        let n = angles.len();
        let mut d0 = angles[start] - anchor;
        while d0 > PI {
            d0 -= 2.0 * PI;
        }
        while d0 < -PI {
            d0 += 2.0 * PI;
        }
        let mut out = Vec::with_capacity(n + 1);
        let mut cur = anchor + d0;
        out.push(cur);
        for k in 0..n {
            let from = angles[(start + k) % n];
            let to = angles[(start + k + 1) % n];
            let mut step = to - from;
            if step <= 0.0 {
                step += 2.0 * PI;
            }
            cur += step;
            out.push(cur);
        }
        out
    };
    let inner_angle = cumulative(&inner.angles, 0, a0);
    let outer_angle = cumulative(&outer.angles, j0, a0);

    let mut ia = 0usize; // steps taken on the inner ring
    let mut ib = 0usize; // steps taken on the outer ring
    for _ in 0..(na + nb) {
        let a_cur = inner.vertices[ia % na];
        let b_cur = outer.vertices[(j0 + ib) % nb];
        let advance_inner = if ia == na {
            false
        } else if ib == nb {
            true
        } else {
            inner_angle[ia + 1] <= outer_angle[ib + 1]
        };
        if advance_inner {
            let a_next = inner.vertices[(ia + 1) % na];
            triangles.push([a_cur, b_cur, a_next]);
            ia += 1;
        } else {
            let b_next = outer.vertices[(j0 + ib + 1) % nb];
            triangles.push([b_cur, b_next, a_cur]);
            ib += 1;
        }
    }
    debug_assert_eq!(ia, na);
    debug_assert_eq!(ib, nb);
}

/// Generates a conforming mesh of `(-1,1)^2` whose interface polyline
/// interpolates the curve `theta -> r(theta) * (cos theta, sin theta)`.
///
/// The profile must stay strictly inside the unit circle; profiles that
/// fold the mesh are rejected with the worst offending element.
pub fn generate_interface_mesh<F>(radial_profile: F, target_edge_length: f64) -> Result<TriMesh>
where
    F: Fn(f64) -> f64,
{
    if !(target_edge_length > 0.0) || !target_edge_length.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target edge length must be positive, got {target_edge_length}"
        )));
    }
    let h = target_edge_length.min(0.5);

    // Counts are multiples of four so the half-step angular offset keeps
    // every ring vertex strictly off the coordinate axes; meshes of
    // different resolution then never share interior vertex positions or
    // put one mesh's vertices on another's edges, which keeps cross-mesh
    // interpolation smooth under small perturbations.
    let ring_count =
        |perimeter: f64| -> usize { ((perimeter / (4.0 * h)).round() as usize).max(2) * 4 };

    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    // Center fan.
    let center = points.len();
    points.push([0.0, 0.0]);

    let n_interior = ((TEMPLATE_RADIUS / h).round() as usize).max(2);
    let n_int_ring = ring_count(2.0 * PI * TEMPLATE_RADIUS);

    let mut rings: Vec<Ring> = Vec::new();
    for i in 1..=n_interior {
        let r = TEMPLATE_RADIUS * i as f64 / n_interior as f64;
        let count = if i == n_interior { n_int_ring } else { ring_count(2.0 * PI * r).min(n_int_ring) };
        rings.push(circle_ring(&mut points, r, count));
    }
    let interface_ring_idx = rings.len() - 1;

    // Mean radial extent between the circle and the square; the exact
    // value only sets the ring count.
    let mean_square_radius = 4.0 / PI * (1.0 + 2.0_f64.sqrt()).ln();
    let n_outer = (((mean_square_radius - TEMPLATE_RADIUS) / h).round() as usize).max(2);
    let n_side = ((2.0 / h).round() as usize).max(2);
    for j in 1..=n_outer {
        let s = j as f64 / n_outer as f64;
        if j == n_outer {
            rings.push(square_ring(&mut points, n_side));
        } else {
            let perimeter = (1.0 - s) * 2.0 * PI * TEMPLATE_RADIUS + s * 8.0;
            let count = ring_count(perimeter).max(n_int_ring);
            rings.push(blended_ring(&mut points, s, count));
        }
    }

    // Fan around the center, then zip consecutive rings.
    let first = &rings[0];
    let nf = first.vertices.len();
    for k in 0..nf {
        triangles.push([center, first.vertices[k], first.vertices[(k + 1) % nf]]);
    }
    let mut region = vec![Region::Interior; triangles.len()];
    for w in 0..rings.len() - 1 {
        let before = triangles.len();
        zip_rings(&mut triangles, &rings[w], &rings[w + 1]);
        let label = if w < interface_ring_idx { Region::Interior } else { Region::Exterior };
        region.resize(before + (triangles.len() - before), label);
    }

    // Boundary bookkeeping. Square edges are tagged by their midpoint side;
    // interface edges follow the interface ring.
    let interface_ring = &rings[interface_ring_idx];
    let square = rings.last().unwrap();
    let mut boundary_edges = Vec::new();
    let nsq = square.vertices.len();
    for k in 0..nsq {
        let a = square.vertices[k];
        let b = square.vertices[(k + 1) % nsq];
        let mid = [
            0.5 * (points[a][0] + points[b][0]),
            0.5 * (points[a][1] + points[b][1]),
        ];
        let tag = if (mid[1] - 1.0).abs() < 1e-9 {
            BoundaryTag::Top
        } else if (mid[1] + 1.0).abs() < 1e-9 {
            BoundaryTag::Bottom
        } else if (mid[0] + 1.0).abs() < 1e-9 {
            BoundaryTag::Left
        } else if (mid[0] - 1.0).abs() < 1e-9 {
            BoundaryTag::Right
        } else {
            return Err(Error::InvalidMesh(format!(
                "square edge midpoint ({:.6},{:.6}) is on no side",
                mid[0], mid[1]
            )));
        };
        boundary_edges.push(BoundaryEdge { vertices: [a, b], tag });
    }
    let nint = interface_ring.vertices.len();
    for k in 0..nint {
        boundary_edges.push(BoundaryEdge {
            vertices: [interface_ring.vertices[k], interface_ring.vertices[(k + 1) % nint]],
            tag: BoundaryTag::Interface,
        });
    }
    let interface_loop = interface_ring.vertices.clone();

    // Radial morph: the interface ring lands on the profile, the center
    // and the outer square stay fixed.
    for p in points.iter_mut() {
        let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if rho == 0.0 {
            continue;
        }
        let theta = p[1].atan2(p[0]);
        let r_target = radial_profile(theta);
        if !r_target.is_finite() || r_target <= 0.0 || r_target >= 1.0 {
            return Err(Error::ProfileOutOfBounds { theta, r: r_target });
        }
        let r_sq = square_radius(theta);
        let rho_new = if rho <= TEMPLATE_RADIUS * (1.0 + 1e-12) {
            rho / TEMPLATE_RADIUS * r_target
        } else {
            r_target + (rho - TEMPLATE_RADIUS) * (r_sq - r_target) / (r_sq - TEMPLATE_RADIUS)
        };
        let f = rho_new / rho;
        p[0] *= f;
        p[1] *= f;
    }

    TriMesh::new(points, triangles, region, boundary_edges, interface_loop)
}
