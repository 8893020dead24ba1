//! Shape-derivative assembly: the volume form as an elasticity source
//! term, the Hadamard surface density on the interface, and the exact
//! derivative of the perimeter penalty.

use crate::error::{Error, Result};
use crate::fem::P1Element;
use crate::mesh::{DeformField, MeshId, Region, TriMesh};
use crate::parabolic::{ModelData, ObservationGradients, TimeField};

/// Nodal 2-vector load, the right-hand side of the mesh-deformation solve.
/// Entries at outer-boundary vertices are always zero; with `restricted`
/// set, entries away from the interface patch are zeroed as well.
#[derive(Debug, Clone)]
pub struct ShapeLoad {
    mesh_id: MeshId,
    pub values: Vec<[f64; 2]>,
    pub restricted: bool,
}

impl ShapeLoad {
    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn zeros(mesh: &TriMesh, restricted: bool) -> Self {
        ShapeLoad { mesh_id: mesh.id(), values: vec![[0.0; 2]; mesh.num_vertices()], restricted }
    }

    /// Sum of two loads on the same mesh. The result is flagged restricted
    /// only when both operands are.
    pub fn add(&self, other: &ShapeLoad) -> Result<ShapeLoad> {
        if self.mesh_id != other.mesh_id {
            return Err(Error::Mismatch("adding loads from different meshes".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
            .collect();
        Ok(ShapeLoad { mesh_id: self.mesh_id, values, restricted: self.restricted && other.restricted })
    }

    /// Drops every row not sitting on an interface-loop vertex. Hat
    /// functions of off-loop vertices have zero trace on the interface
    /// curve, so the Hadamard structure says their pairings are pure
    /// discretization noise; projecting them out keeps the force inside
    /// the subspace spanned by interface tractions and preserves mesh
    /// quality near fast-moving interface segments.
    pub fn restrict_to_interface(&self, mesh: &TriMesh) -> Result<ShapeLoad> {
        if self.mesh_id != mesh.id() {
            return Err(Error::Mismatch("load lives on a different mesh".into()));
        }
        let topo = mesh.topology();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(v, val)| if topo.is_interface_vertex(v) { *val } else { [0.0, 0.0] })
            .collect();
        Ok(ShapeLoad { mesh_id: self.mesh_id, values, restricted: true })
    }
}

/// Scalar Hadamard density per interface vertex (parallel to the mesh
/// interface loop), multiplying the normal trace of the test field.
#[derive(Debug, Clone)]
pub struct SurfaceDensity {
    mesh_id: MeshId,
    pub values: Vec<f64>,
}

impl SurfaceDensity {
    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }
}

/// Duality pairing of a load with a deformation field: the discrete
/// directional shape derivative.
pub fn directional_value(load: &ShapeLoad, field: &DeformField) -> Result<f64> {
    if load.mesh_id() != field.mesh_id() {
        return Err(Error::Mismatch("load and field live on different meshes".into()));
    }
    Ok(load
        .values
        .iter()
        .zip(&field.values)
        .map(|(l, v)| l[0] * v[0] + l[1] * v[1])
        .sum())
}

fn check_fields(
    mesh: &TriMesh,
    data: &ModelData,
    fields: &[&TimeField],
) -> Result<()> {
    for f in fields {
        if f.mesh_id() != mesh.id() {
            return Err(Error::Mismatch("time field lives on a different mesh".into()));
        }
        if f.n_steps() != data.n_steps {
            return Err(Error::Mismatch("time field and model disagree on step count".into()));
        }
    }
    Ok(())
}

/// Volume form of the tracking shape derivative, assembled against every
/// vector-valued nodal basis function:
///
/// ```text
/// Dj[V] = sum_n dt * int -k grad(y)^T (grad(V) + grad(V)^T) grad(p)
///                      - p grad(f)^T V
///                      + div(V) ( 1/2 (y - ybar)^2 + dy/dt p
///                                 + k grad(y)^T grad(p) - f p )
/// ```
///
/// The time derivative is the backward difference paired with `p^n`, and
/// P1-product integrals use the exact element mass matrix, so for a zero
/// source the load is the exact gradient of the discrete objective with
/// the observation carried along nodally. When `obs_grad` is supplied,
/// the term `-(y - ybar) grad(ybar)^T V` is added with the observation
/// interpolant's gradients at the vertices, making the load the exact
/// gradient of the objective that re-evaluates the observation at moved
/// points; without it the formula treats the observation as material
/// data, which is the printed form of the derivative. With `restrict`
/// set, rows whose basis support misses the interface are zeroed, which
/// suppresses the discretization noise that otherwise excites
/// deformations with no normal component at the interface.
pub fn assemble_domain_derivative(
    mesh: &TriMesh,
    data: &ModelData,
    state: &TimeField,
    adjoint: &TimeField,
    ybar: &TimeField,
    obs_grad: Option<&ObservationGradients>,
    restrict: bool,
) -> Result<ShapeLoad> {
    check_fields(mesh, data, &[state, adjoint, ybar])?;
    if let Some(g) = obs_grad {
        if g.mesh_id() != mesh.id() || g.steps.len() != ybar.steps.len() {
            return Err(Error::Mismatch(
                "observation gradients do not match the mesh or time grid".into(),
            ));
        }
    }
    let n_steps = data.n_steps;
    let dt = data.dt();
    let source = &data.source;
    let have_source = !source.is_zero();

    let mut load = vec![[0.0; 2]; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::from_mesh(mesh, t);
        let tri = mesh.triangles[t];
        let k = match mesh.region[t] {
            Region::Exterior => data.k1,
            Region::Interior => data.k2,
        };
        let mass = el.mass();
        let centroid = {
            let [a, b, c] = mesh.tri_coords(t);
            [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
        };

        for step in 1..=n_steps {
            let y_loc = tri.map(|v| state.steps[step][v]);
            let y_prev = tri.map(|v| state.steps[step - 1][v]);
            let p_loc = tri.map(|v| adjoint.steps[step][v]);
            let w_loc = [
                y_loc[0] - ybar.steps[step][tri[0]],
                y_loc[1] - ybar.steps[step][tri[1]],
                y_loc[2] - ybar.steps[step][tri[2]],
            ];
            let grad_y = el.field_gradient(y_loc);
            let grad_p = el.field_gradient(p_loc);

            // Element-constant part of the div(V) factor.
            let mut bulk = k * el.area * (grad_y[0] * grad_p[0] + grad_y[1] * grad_p[1]);
            // 1/2 (y - ybar)^2 and (y^n - y^{n-1})/dt * p^n, exactly.
            bulk += 0.5 * el.integrate_product(w_loc, w_loc);
            let dy = [
                (y_loc[0] - y_prev[0]) / dt,
                (y_loc[1] - y_prev[1]) / dt,
                (y_loc[2] - y_prev[2]) / dt,
            ];
            bulk += el.integrate_product(dy, p_loc);

            let (f_centroid, grad_f) = if have_source {
                let time = dt * step as f64;
                (source.value(time, centroid), source.gradient(time, centroid))
            } else {
                (0.0, [0.0, 0.0])
            };
            if have_source {
                // -f p under div(V); f at the centroid, p integrated.
                bulk -= f_centroid * el.area / 3.0 * (p_loc[0] + p_loc[1] + p_loc[2]);
            }

            for a in 0..3 {
                let ga = el.grad[a];
                let gy_ga = grad_y[0] * ga[0] + grad_y[1] * ga[1];
                let gp_ga = grad_p[0] * ga[0] + grad_p[1] * ga[1];
                // int p phi_a and int (y - ybar) phi_a, exact for P1.
                let p_phi_a = mass[a][0] * p_loc[0] + mass[a][1] * p_loc[1] + mass[a][2] * p_loc[2];
                let w_phi_a = mass[a][0] * w_loc[0] + mass[a][1] * w_loc[1] + mass[a][2] * w_loc[2];
                for d in 0..2 {
                    let mut v = -k * el.area * (grad_y[d] * gp_ga + gy_ga * grad_p[d]);
                    v += bulk * ga[d];
                    if have_source {
                        v -= grad_f[d] * p_phi_a;
                    }
                    if let Some(g) = obs_grad {
                        v -= w_phi_a * g.steps[step][tri[a]][d];
                    }
                    load[tri[a]][d] += dt * v;
                }
            }
        }
    }

    let topo = mesh.topology();
    for (v, entry) in load.iter_mut().enumerate() {
        if topo.is_outer_vertex(v) || (restrict && !topo.in_interface_patch(v)) {
            *entry = [0.0, 0.0];
        }
    }
    Ok(ShapeLoad { mesh_id: mesh.id(), values: load, restricted: restrict })
}

/// Hadamard density of the tracking derivative on the interface: per
/// vertex, the time-summed jump expression with one-sided traces taken as
/// area-weighted averages of the element-constant gradients on each side.
///
/// Sign convention: with the normal pointing out of the interior region
/// and the adjoint driven by `-(y - ybar)`, the density carries the jump
/// `k2 - k1`; this is the orientation under which it agrees with the
/// volume form (which is pinned by finite differences of the discrete
/// objective).
pub fn assemble_boundary_derivative(
    mesh: &TriMesh,
    data: &ModelData,
    state: &TimeField,
    adjoint: &TimeField,
) -> Result<SurfaceDensity> {
    check_fields(mesh, data, &[state, adjoint])?;
    let dt = data.dt();
    let jump = data.k2 - data.k1;
    let topo = mesh.topology();

    let mut values = Vec::with_capacity(mesh.interface_loop.len());
    for &v in &mesh.interface_loop {
        let mut exterior: Vec<usize> = Vec::new();
        let mut interior: Vec<usize> = Vec::new();
        for &t in topo.vertex_triangles(v) {
            match mesh.region[t] {
                Region::Exterior => exterior.push(t),
                Region::Interior => interior.push(t),
            }
        }
        if exterior.is_empty() || interior.is_empty() {
            return Err(Error::InvalidMesh(format!(
                "interface vertex {v} has no elements on one side"
            )));
        }
        let elements: Vec<(usize, P1Element)> = exterior
            .iter()
            .chain(&interior)
            .map(|&t| (t, P1Element::from_mesh(mesh, t)))
            .collect();
        let area_split = exterior.len();

        let mut density = 0.0;
        for step in 1..=data.n_steps {
            let avg = |side: std::ops::Range<usize>, field: &TimeField| -> [f64; 2] {
                let mut acc = [0.0, 0.0];
                let mut area = 0.0;
                for (t, el) in &elements[side] {
                    let tri = mesh.triangles[*t];
                    let g = el.field_gradient(tri.map(|w| field.steps[step][w]));
                    acc[0] += el.area * g[0];
                    acc[1] += el.area * g[1];
                    area += el.area;
                }
                [acc[0] / area, acc[1] / area]
            };
            let gy1 = avg(0..area_split, state);
            let gp2 = avg(area_split..elements.len(), adjoint);
            density += dt * jump * (gy1[0] * gp2[0] + gy1[1] * gp2[1]);
        }
        values.push(density);
    }
    Ok(SurfaceDensity { mesh_id: mesh.id(), values })
}

/// Raw per-edge Hadamard traces for the surface pipeline: for each
/// interface edge, the one-sided gradients come from the unique adjacent
/// element on each region. Same sign convention as
/// [`assemble_boundary_derivative`].
pub fn boundary_edge_density(
    mesh: &TriMesh,
    data: &ModelData,
    state: &TimeField,
    adjoint: &TimeField,
) -> Result<Vec<f64>> {
    check_fields(mesh, data, &[state, adjoint])?;
    let dt = data.dt();
    let jump = data.k2 - data.k1;
    let topo = mesh.topology();

    let mut values = Vec::with_capacity(mesh.interface_loop.len());
    for [a, b] in mesh.interface_edges() {
        let mut t_ext = None;
        let mut t_int = None;
        for &t in topo.vertex_triangles(a) {
            if mesh.triangles[t].contains(&b) {
                match mesh.region[t] {
                    Region::Exterior => t_ext = Some(t),
                    Region::Interior => t_int = Some(t),
                }
            }
        }
        let (t1, t2) = match (t_ext, t_int) {
            (Some(t1), Some(t2)) => (t1, t2),
            _ => {
                return Err(Error::InvalidMesh(format!(
                    "interface edge ({a},{b}) lacks a triangle on one side"
                )))
            }
        };
        let el1 = P1Element::from_mesh(mesh, t1);
        let el2 = P1Element::from_mesh(mesh, t2);
        let tri1 = mesh.triangles[t1];
        let tri2 = mesh.triangles[t2];
        let mut density = 0.0;
        for step in 1..=data.n_steps {
            let gy1 = el1.field_gradient(tri1.map(|w| state.steps[step][w]));
            let gp2 = el2.field_gradient(tri2.map(|w| adjoint.steps[step][w]));
            density += dt * jump * (gy1[0] * gp2[0] + gy1[1] * gp2[1]);
        }
        values.push(density);
    }
    Ok(values)
}

/// Load of the perimeter penalty, the exact derivative of the discrete
/// polyline length: for each interface edge with unit tangent `t`, the
/// endpoints receive `-mu t` and `+mu t`.
pub fn assemble_perimeter_load(mesh: &TriMesh, mu_reg: f64) -> Result<ShapeLoad> {
    if mu_reg < 0.0 {
        return Err(Error::InvalidParameter(format!("mu_reg must be nonnegative, got {mu_reg}")));
    }
    let mut load = ShapeLoad::zeros(mesh, true);
    if mu_reg == 0.0 {
        return Ok(load);
    }
    for [a, b] in mesh.interface_edges() {
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len == 0.0 {
            return Err(Error::InvalidMesh(format!("zero-length interface edge ({a},{b})")));
        }
        let t = [d[0] / len, d[1] / len];
        load.values[b][0] += mu_reg * t[0];
        load.values[b][1] += mu_reg * t[1];
        load.values[a][0] -= mu_reg * t[0];
        load.values[a][1] -= mu_reg * t[1];
    }
    Ok(load)
}
