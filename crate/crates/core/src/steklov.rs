//! The mesh-deformation elasticity operator and the metric built on it.
//!
//! One assembled bilinear form serves three purposes: it extends interface
//! forces into mesh deformations, it represents shape gradients (the
//! deformation solving `a(U,V) = DJ[V]` is the gradient), and it evaluates
//! the metric inner products the quasi-Newton update needs. Neither the
//! Neumann-to-Dirichlet map nor the trace operator is ever materialized;
//! everything goes through volume fields.

use crate::error::{Error, Result};
use crate::fem::{pcg_solve, CsrBuilder, DirichletSet, P1Element, SparseSpd};
use crate::mesh::{DeformField, MeshId, TriMesh};
use crate::shape_calculus::{directional_value, ShapeLoad};

/// Vector P1 elasticity stiffness with homogeneous Dirichlet conditions on
/// the outer boundary. Degrees of freedom interleave as `2v`, `2v+1`.
pub struct ElasticityOperator {
    mesh_id: MeshId,
    pub matrix: SparseSpd,
    dirichlet: DirichletSet,
    pub lambda: f64,
    pub mu: f64,
    n_vertices: usize,
}

/// Lame parameters from Young's modulus and Poisson's ratio.
pub fn lame_parameters(young: f64, poisson: f64) -> (f64, f64) {
    let lambda = poisson * young / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    (lambda, mu)
}

/// Assembles `a(U,V) = int sigma(U) : eps(V)` with
/// `sigma = lambda tr(eps) I + 2 mu eps`.
pub fn assemble_elasticity(mesh: &TriMesh, young: f64, poisson: f64) -> Result<ElasticityOperator> {
    if !(young > 0.0) {
        return Err(Error::InvalidParameter(format!("Young's modulus must be positive, got {young}")));
    }
    if !(poisson > 0.0 && poisson < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "Poisson's ratio must lie in (0, 0.5), got {poisson}"
        )));
    }
    let (lambda, mu) = lame_parameters(young, poisson);
    let n = mesh.num_vertices();
    let mut builder = CsrBuilder::new(2 * n);
    // Voigt-ordered material matrix for [e_xx, e_yy, gamma_xy].
    let d = [
        [lambda + 2.0 * mu, lambda, 0.0],
        [lambda, lambda + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::from_mesh(mesh, t);
        let tri = mesh.triangles[t];
        // Strain-displacement rows for local dof (a, component c).
        let b_row = |a: usize, c: usize| -> [f64; 3] {
            let g = el.grad[a];
            if c == 0 {
                [g[0], 0.0, g[1]]
            } else {
                [0.0, g[1], g[0]]
            }
        };
        for a in 0..3 {
            for ca in 0..2 {
                let ba = b_row(a, ca);
                let db = [
                    d[0][0] * ba[0] + d[0][1] * ba[1] + d[0][2] * ba[2],
                    d[1][0] * ba[0] + d[1][1] * ba[1] + d[1][2] * ba[2],
                    d[2][0] * ba[0] + d[2][1] * ba[1] + d[2][2] * ba[2],
                ];
                for b in 0..3 {
                    for cb in 0..2 {
                        let bb = b_row(b, cb);
                        let v = el.area * (db[0] * bb[0] + db[1] * bb[1] + db[2] * bb[2]);
                        builder.add(2 * tri[a] + ca, 2 * tri[b] + cb, v);
                    }
                }
            }
        }
    }
    let topo = mesh.topology();
    let dirichlet = DirichletSet::new(
        2 * n,
        (0..n)
            .filter(|&v| topo.is_outer_vertex(v))
            .flat_map(|v| [(2 * v, 0.0), (2 * v + 1, 0.0)]),
    )?;
    Ok(ElasticityOperator {
        mesh_id: mesh.id(),
        matrix: builder.build(),
        dirichlet,
        lambda,
        mu,
        n_vertices: n,
    })
}

fn flatten(values: &[[f64; 2]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * values.len());
    for v in values {
        out.push(v[0]);
        out.push(v[1]);
    }
    out
}

fn unflatten(values: &[f64]) -> Vec<[f64; 2]> {
    values.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

impl ElasticityOperator {
    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn dirichlet(&self) -> &DirichletSet {
        &self.dirichlet
    }

    /// Gradient representation: solves `a(U, V) = load . V` for all test
    /// fields vanishing on the outer boundary.
    pub fn solve_representation(&self, load: &ShapeLoad, rel_tol: f64) -> Result<DeformField> {
        if load.mesh_id() != self.mesh_id {
            return Err(Error::Mismatch("load lives on a different mesh".into()));
        }
        let rhs = flatten(&load.values);
        let (x, _) =
            pcg_solve(&self.matrix, &rhs, &self.dirichlet, rel_tol, 20 * self.matrix.dim() + 4000)?;
        Ok(DeformField::from_raw(self.mesh_id, unflatten(&x)))
    }

    /// Elasticity solve with prescribed interface displacement and zero
    /// volume load; `interface_values` runs parallel to the mesh interface
    /// loop.
    pub fn solve_dirichlet(
        &self,
        mesh: &TriMesh,
        interface_values: &[[f64; 2]],
        rel_tol: f64,
    ) -> Result<DeformField> {
        if mesh.id() != self.mesh_id {
            return Err(Error::Mismatch("operator assembled on a different mesh".into()));
        }
        if interface_values.len() != mesh.interface_loop.len() {
            return Err(Error::Mismatch(format!(
                "{} interface values for {} loop vertices",
                interface_values.len(),
                mesh.interface_loop.len()
            )));
        }
        let mut pairs: Vec<(usize, f64)> = self
            .dirichlet
            .indices()
            .iter()
            .map(|&i| (i, 0.0))
            .collect();
        for (&v, val) in mesh.interface_loop.iter().zip(interface_values) {
            pairs.push((2 * v, val[0]));
            pairs.push((2 * v + 1, val[1]));
        }
        let dirichlet = DirichletSet::new(2 * self.n_vertices, pairs)?;
        let rhs = vec![0.0; 2 * self.n_vertices];
        let (x, _) =
            pcg_solve(&self.matrix, &rhs, &dirichlet, rel_tol, 20 * self.matrix.dim() + 4000)?;
        Ok(DeformField::from_raw(self.mesh_id, unflatten(&x)))
    }

    /// Metric inner product `a(U, V) = U^T A V`.
    pub fn inner(&self, u: &DeformField, v: &DeformField) -> Result<f64> {
        if u.mesh_id() != self.mesh_id || v.mesh_id() != self.mesh_id {
            return Err(Error::Mismatch("fields live on a different mesh".into()));
        }
        Ok(self.matrix.inner(&flatten(&u.values), &flatten(&v.values)))
    }

    pub fn norm(&self, u: &DeformField) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }

    /// Residual bound of the representation identity `a(U, V) = load . V`:
    /// `|a(U,V) - load . V| <= |r| |V|` with `r = A U - load`.
    pub fn representation_residual(&self, u: &DeformField, load: &ShapeLoad) -> Result<f64> {
        if u.mesh_id() != self.mesh_id || load.mesh_id() != self.mesh_id {
            return Err(Error::Mismatch("operands live on a different mesh".into()));
        }
        let mut r = self.matrix.apply(&flatten(&u.values));
        let rhs = flatten(&load.values);
        for i in 0..r.len() {
            r[i] -= rhs[i];
        }
        self.dirichlet.project_free(&mut r);
        Ok(r.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// Largest element Frobenius norm of the displacement Jacobian; a step
/// `scale * U` keeps the deformation injective while
/// `margin * scale < 1`, so callers bound their step length by it.
pub fn injectivity_margin(mesh: &TriMesh, u: &DeformField) -> Result<f64> {
    if u.mesh_id() != mesh.id() {
        return Err(Error::Mismatch("field lives on a different mesh".into()));
    }
    let mut worst = 0.0f64;
    for t in 0..mesh.num_triangles() {
        let el = P1Element::from_mesh(mesh, t);
        let tri = mesh.triangles[t];
        let mut jac = [[0.0; 2]; 2];
        for (a, &v) in tri.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    jac[i][j] += u.values[v][i] * el.grad[a][j];
                }
            }
        }
        let frob =
            (jac[0][0] * jac[0][0] + jac[0][1] * jac[0][1] + jac[1][0] * jac[1][0] + jac[1][1] * jac[1][1])
                .sqrt();
        worst = worst.max(frob);
    }
    Ok(worst)
}

/// Directional-derivative consistency of the representation: checks
/// `a(U, V_k) = load . V_k` for seeded random fields, within the solver
/// residual. Returns the worst absolute defect normalized by `|V_k|`.
pub fn metric_identity_defect(
    op: &ElasticityOperator,
    u: &DeformField,
    load: &ShapeLoad,
    n_probes: usize,
    seed: u64,
) -> Result<f64> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_probes {
        let values: Vec<[f64; 2]> = (0..u.values.len())
            .map(|v| {
                if op.dirichlet.is_constrained(2 * v) {
                    [0.0, 0.0]
                } else {
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
                }
            })
            .collect();
        let v = DeformField::from_raw(op.mesh_id(), values);
        let defect = (op.inner(u, &v)? - directional_value(load, &v)?).abs();
        let norm = v.dot(&v).sqrt();
        worst = worst.max(defect / norm.max(1e-300));
    }
    Ok(worst)
}
