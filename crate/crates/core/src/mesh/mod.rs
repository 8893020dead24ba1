//! Interface-conforming triangulations of the square domain `(-1,1)^2`.
//!
//! A [`TriMesh`] carries the two material regions (exterior region 1,
//! interior region 2), tagged outer-boundary edges and the closed interface
//! polyline separating the regions. Meshes are immutable after
//! construction; every operation returns a new mesh or field, so values can
//! be shared read-only across threads.
//!
//! Orientation conventions are fixed here once: triangles are
//! counter-clockwise, the interface loop runs counter-clockwise around the
//! interior region, and interface normals point out of region 2. Normal
//! signs everywhere else in the crate derive from these.

mod generate;
mod geometry;
mod io;

pub use generate::generate_interface_mesh;
pub use geometry::{interface_geometry, polyline_geometry, InterfaceVertexGeometry};
pub use io::{load_t2m, save_t2m, save_vtk, VtkField};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Identity of a mesh instance. Fields carry the id of the mesh they live
/// on so mismatched combinations fail fast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshId(u64);

fn next_mesh_id() -> MeshId {
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    MeshId(COUNTER.fetch_add(1, Ordering::Relaxed))
}

/// Material region of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Exterior region (diffusivity `k1`).
    Exterior,
    /// Interior region enclosed by the interface (diffusivity `k2`).
    Interior,
}

impl Region {
    pub fn label(self) -> u8 {
        match self {
            Region::Exterior => 1,
            Region::Interior => 2,
        }
    }

    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            1 => Ok(Region::Exterior),
            2 => Ok(Region::Interior),
            other => Err(Error::InvalidMesh(format!("region label {other} not in {{1,2}}"))),
        }
    }
}

/// Tag of a boundary edge. The four outer tags partition the square
/// boundary; `Interface` marks the interior loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Top,
    Bottom,
    Left,
    Right,
    Interface,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Top => "top",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Interface => "interface",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "top" => BoundaryTag::Top,
            "bottom" => BoundaryTag::Bottom,
            "left" => BoundaryTag::Left,
            "right" => BoundaryTag::Right,
            "interface" => BoundaryTag::Interface,
            other => return Err(Error::InvalidMesh(format!("unknown boundary tag {other:?}"))),
        })
    }

    pub fn is_outer(self) -> bool {
        !matches!(self, BoundaryTag::Interface)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Vertex-to-triangle and triangle-neighbor adjacency, shared between a
/// mesh and its deformed copies (connectivity never changes).
#[derive(Debug)]
pub struct Topology {
    /// CSR offsets into `vertex_tris`.
    vertex_tri_ptr: Vec<usize>,
    vertex_tris: Vec<usize>,
    /// Neighbor triangle across local edge `(i+1, i+2)`, if any.
    tri_neighbors: Vec<[Option<usize>; 3]>,
    /// Vertices on the outer square boundary.
    outer_vertices: Vec<bool>,
    /// Vertices on the interface loop.
    interface_vertices: Vec<bool>,
    /// Vertices whose element patch touches the interface loop.
    interface_patch: Vec<bool>,
}

/// Conforming triangulation of `(-1,1)^2` with region labels, tagged
/// boundary edges and the interface loop around region 2.
#[derive(Debug, Clone)]
pub struct TriMesh {
    id: MeshId,
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub region: Vec<Region>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Interface vertices in counter-clockwise order around region 2.
    pub interface_loop: Vec<usize>,
    topology: Arc<Topology>,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

const OUTER_COORD_TOL: f64 = 1e-9;

impl TriMesh {
    /// Builds a mesh and checks every structural invariant. Use this for
    /// meshes coming from generators or files; deformed copies of an
    /// already-validated mesh go through [`apply_deformation`].
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        region: Vec<Region>,
        boundary_edges: Vec<BoundaryEdge>,
        interface_loop: Vec<usize>,
    ) -> Result<Self> {
        if region.len() != triangles.len() {
            return Err(Error::InvalidMesh(format!(
                "{} region labels for {} triangles",
                region.len(),
                triangles.len()
            )));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::InvalidMesh(format!("triangle {t} references vertex {v}")));
                }
            }
        }
        let topology = Arc::new(Topology::build(
            vertices.len(),
            &triangles,
            &boundary_edges,
            &interface_loop,
        )?);
        let mesh = TriMesh {
            id: next_mesh_id(),
            vertices,
            triangles,
            region,
            boundary_edges,
            interface_loop,
            topology,
        };
        mesh.check_areas()?;
        mesh.check_structure()?;
        Ok(mesh)
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn tri_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_coords(t);
        signed_area(a, b, c)
    }

    /// Interface edges as consecutive loop pairs `(loop[i], loop[i+1])`.
    pub fn interface_edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let n = self.interface_loop.len();
        (0..n).map(move |i| [self.interface_loop[i], self.interface_loop[(i + 1) % n]])
    }

    /// Total length of the interface polyline.
    pub fn interface_perimeter(&self) -> f64 {
        self.interface_edges()
            .map(|[a, b]| {
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
            })
            .sum()
    }

    /// Vertices lying on outer edges with the given tag.
    pub fn tagged_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut mark = vec![false; self.num_vertices()];
        for be in &self.boundary_edges {
            if be.tag == tag {
                mark[be.vertices[0]] = true;
                mark[be.vertices[1]] = true;
            }
        }
        (0..self.num_vertices()).filter(|&v| mark[v]).collect()
    }

    /// Minimum triangle shape quality, `4*sqrt(3)*area / sum(edge^2)`,
    /// normalized so an equilateral triangle scores 1.
    pub fn min_quality(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let [a, b, c] = self.tri_coords(t);
                let l2 = |p: [f64; 2], q: [f64; 2]| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                let denom = l2(a, b) + l2(b, c) + l2(c, a);
                4.0 * 3.0_f64.sqrt() * signed_area(a, b, c) / denom
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn check_areas(&self) -> Result<()> {
        let mut worst: Option<(usize, f64)> = None;
        for t in 0..self.num_triangles() {
            let area = self.tri_area(t);
            if area <= 0.0 && worst.map_or(true, |(_, w)| area < w) {
                worst = Some((t, area));
            }
        }
        match worst {
            Some((index, area)) => Err(Error::InvertedTriangle { index, area }),
            None => Ok(()),
        }
    }

    fn check_structure(&self) -> Result<()> {
        // Interface loop: simple, closed, counter-clockwise.
        let loop_len = self.interface_loop.len();
        if loop_len < 3 {
            return Err(Error::InvalidMesh("interface loop has fewer than 3 vertices".into()));
        }
        {
            let mut seen = vec![false; self.num_vertices()];
            for &v in &self.interface_loop {
                if seen[v] {
                    return Err(Error::InvalidMesh(format!("interface loop revisits vertex {v}")));
                }
                seen[v] = true;
            }
        }
        let loop_area: f64 = (0..loop_len)
            .map(|i| {
                let a = self.vertices[self.interface_loop[i]];
                let b = self.vertices[self.interface_loop[(i + 1) % loop_len]];
                0.5 * (a[0] * b[1] - b[0] * a[1])
            })
            .sum();
        if loop_area <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "interface loop is not counter-clockwise (signed area {loop_area:.3e})"
            )));
        }

        // Every interface edge must sit between one exterior and one
        // interior triangle.
        for [a, b] in self.interface_edges() {
            let mut regions = Vec::new();
            for &t in self.topology.vertex_triangles(a) {
                let tri = self.triangles[t];
                if tri.contains(&b) {
                    regions.push(self.region[t]);
                }
            }
            if regions.len() != 2 || regions[0] == regions[1] {
                return Err(Error::InvalidMesh(format!(
                    "interface edge ({a},{b}) does not separate regions (adjacent: {regions:?})"
                )));
            }
        }

        // Outer edges must lie on the square and match their side tag.
        for be in &self.boundary_edges {
            if !be.tag.is_outer() {
                continue;
            }
            for &v in &be.vertices {
                let [x, y] = self.vertices[v];
                let on = match be.tag {
                    BoundaryTag::Top => (y - 1.0).abs() <= OUTER_COORD_TOL,
                    BoundaryTag::Bottom => (y + 1.0).abs() <= OUTER_COORD_TOL,
                    BoundaryTag::Left => (x + 1.0).abs() <= OUTER_COORD_TOL,
                    BoundaryTag::Right => (x - 1.0).abs() <= OUTER_COORD_TOL,
                    BoundaryTag::Interface => unreachable!(),
                };
                if !on {
                    return Err(Error::InvalidMesh(format!(
                        "vertex {v} at ({x:.6},{y:.6}) tagged {} but is off that side",
                        be.tag.name()
                    )));
                }
            }
        }

        // Boundary tags partition the mesh boundary: every once-shared
        // triangle edge is a tagged outer edge and vice versa.
        use std::collections::HashMap;
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        let mut outer_tagged = 0usize;
        for be in &self.boundary_edges {
            let [a, b] = be.vertices;
            let key = (a.min(b), a.max(b));
            let count = edge_count.get(&key).copied().unwrap_or(0);
            match (be.tag.is_outer(), count) {
                (true, 1) => outer_tagged += 1,
                (false, 2) => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a},{b}) tagged {} is shared by {count} triangles",
                        be.tag.name()
                    )))
                }
            }
        }
        let boundary_total = edge_count.values().filter(|&&c| c == 1).count();
        if outer_tagged != boundary_total {
            return Err(Error::InvalidMesh(format!(
                "{boundary_total} boundary edges but {outer_tagged} tagged outer edges"
            )));
        }
        Ok(())
    }

    /// Region labels checked against point-in-polygon of triangle
    /// centroids. Quadratic-ish, intended for construction-time and test
    /// use.
    pub fn check_region_consistency(&self) -> Result<()> {
        let polygon: Vec<[f64; 2]> =
            self.interface_loop.iter().map(|&v| self.vertices[v]).collect();
        for t in 0..self.num_triangles() {
            let [a, b, c] = self.tri_coords(t);
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            let inside = point_in_polygon(centroid, &polygon);
            let expected = if inside { Region::Interior } else { Region::Exterior };
            if self.region[t] != expected {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} labeled {:?} but centroid is {}",
                    self.region[t],
                    if inside { "inside" } else { "outside" }
                )));
            }
        }
        Ok(())
    }
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (polygon[i], polygon[j]);
        if (pi[1] > p[1]) != (pj[1] > p[1])
            && p[0] < (pj[0] - pi[0]) * (p[1] - pi[1]) / (pj[1] - pi[1]) + pi[0]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

impl Topology {
    fn build(
        num_vertices: usize,
        triangles: &[[usize; 3]],
        boundary_edges: &[BoundaryEdge],
        interface_loop: &[usize],
    ) -> Result<Self> {
        let mut counts = vec![0usize; num_vertices + 1];
        for tri in triangles {
            for &v in tri {
                counts[v + 1] += 1;
            }
        }
        for i in 0..num_vertices {
            counts[i + 1] += counts[i];
        }
        let vertex_tri_ptr = counts.clone();
        let mut fill = counts;
        let mut vertex_tris = vec![0usize; vertex_tri_ptr[num_vertices]];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[fill[v]] = t;
                fill[v] += 1;
            }
        }

        // Neighbor lookup through a sorted edge table.
        let mut edges: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(triangles.len() * 3);
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                edges.push((a.min(b), a.max(b), t, k));
            }
        }
        edges.sort_unstable();
        let mut tri_neighbors = vec![[None, None, None]; triangles.len()];
        let mut i = 0;
        while i < edges.len() {
            let (a, b, t0, k0) = edges[i];
            if i + 1 < edges.len() && edges[i + 1].0 == a && edges[i + 1].1 == b {
                let (_, _, t1, k1) = edges[i + 1];
                if i + 2 < edges.len() && edges[i + 2].0 == a && edges[i + 2].1 == b {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a},{b}) shared by more than two triangles"
                    )));
                }
                tri_neighbors[t0][k0] = Some(t1);
                tri_neighbors[t1][k1] = Some(t0);
                i += 2;
            } else {
                i += 1;
            }
        }

        let mut outer_vertices = vec![false; num_vertices];
        for be in boundary_edges {
            if be.tag.is_outer() {
                for &v in &be.vertices {
                    if v >= num_vertices {
                        return Err(Error::InvalidMesh(format!("boundary edge vertex {v} out of range")));
                    }
                    outer_vertices[v] = true;
                }
            }
        }
        let mut interface_vertices = vec![false; num_vertices];
        for &v in interface_loop {
            if v >= num_vertices {
                return Err(Error::InvalidMesh(format!("interface vertex {v} out of range")));
            }
            interface_vertices[v] = true;
        }
        let mut interface_patch = vec![false; num_vertices];
        for tri in triangles {
            if tri.iter().any(|&v| interface_vertices[v]) {
                for &v in tri {
                    interface_patch[v] = true;
                }
            }
        }

        Ok(Topology {
            vertex_tri_ptr,
            vertex_tris,
            tri_neighbors,
            outer_vertices,
            interface_vertices,
            interface_patch,
        })
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[self.vertex_tri_ptr[v]..self.vertex_tri_ptr[v + 1]]
    }

    /// Neighbor of triangle `t` across the edge opposite its local vertex
    /// `k`.
    pub fn neighbor(&self, t: usize, k: usize) -> Option<usize> {
        self.tri_neighbors[t][k]
    }

    pub fn is_outer_vertex(&self, v: usize) -> bool {
        self.outer_vertices[v]
    }

    pub fn is_interface_vertex(&self, v: usize) -> bool {
        self.interface_vertices[v]
    }

    /// True when the element patch of `v` touches the interface loop, i.e.
    /// the support of the nodal basis function intersects the interface.
    pub fn in_interface_patch(&self, v: usize) -> bool {
        self.interface_patch[v]
    }
}

/// Nodal 2-vector field over a mesh, vanishing on the outer boundary.
/// Carries gradient representations and mesh deformations.
#[derive(Debug, Clone)]
pub struct DeformField {
    mesh_id: MeshId,
    pub values: Vec<[f64; 2]>,
}

impl DeformField {
    pub fn zeros(mesh: &TriMesh) -> Self {
        DeformField { mesh_id: mesh.id(), values: vec![[0.0; 2]; mesh.num_vertices()] }
    }

    /// Validates length, finiteness and the zero trace on the outer
    /// boundary.
    pub fn new(mesh: &TriMesh, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Mismatch(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        for (v, val) in values.iter().enumerate() {
            if !val[0].is_finite() || !val[1].is_finite() {
                return Err(Error::Mismatch(format!("non-finite deformation at vertex {v}")));
            }
            if mesh.topology().is_outer_vertex(v) && (val[0] != 0.0 || val[1] != 0.0) {
                return Err(Error::Mismatch(format!(
                    "deformation does not vanish on the outer boundary at vertex {v}"
                )));
            }
        }
        Ok(DeformField { mesh_id: mesh.id(), values })
    }

    /// Skips the boundary/finiteness checks; for synthetic test fields and
    /// internal arithmetic whose inputs were already validated.
    pub fn from_raw(mesh_id: MeshId, values: Vec<[f64; 2]>) -> Self {
        DeformField { mesh_id, values }
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    /// Rebinds the field to a connectivity-sharing mesh; the identity
    /// vector transport across deformation steps.
    pub(crate) fn rebind(&mut self, id: MeshId) {
        self.mesh_id = id;
    }

    pub fn dot(&self, other: &DeformField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
            .sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().flat_map(|v| v.iter()).fold(0.0, |m, &x| m.max(x.abs()))
    }
}

/// Moves every vertex to `x + scale * U(x)`, keeping connectivity, tags and
/// region labels. Fails without mutating anything if an element inverts.
pub fn apply_deformation(mesh: &TriMesh, field: &DeformField, scale: f64) -> Result<TriMesh> {
    if field.mesh_id() != mesh.id() {
        return Err(Error::Mismatch("deformation field lives on a different mesh".into()));
    }
    let vertices: Vec<[f64; 2]> = mesh
        .vertices
        .iter()
        .zip(&field.values)
        .map(|(x, u)| [x[0] + scale * u[0], x[1] + scale * u[1]])
        .collect();
    let moved = TriMesh {
        id: next_mesh_id(),
        vertices,
        triangles: mesh.triangles.clone(),
        region: mesh.region.clone(),
        boundary_edges: mesh.boundary_edges.clone(),
        interface_loop: mesh.interface_loop.clone(),
        topology: Arc::clone(&mesh.topology),
    };
    moved.check_areas()?;
    Ok(moved)
}

/// True when the two meshes share connectivity (same triangles on the same
/// vertex set), i.e. one is a deformed copy of the other.
pub fn same_connectivity(a: &TriMesh, b: &TriMesh) -> bool {
    a.num_vertices() == b.num_vertices()
        && (Arc::ptr_eq(&a.topology, &b.topology) || a.triangles == b.triangles)
}
