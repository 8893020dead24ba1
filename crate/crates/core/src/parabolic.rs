//! Forward and adjoint solves of the transmission heat problem, plus the
//! tracking objective.
//!
//! Time discretization is implicit Euler; the adjoint recursion is the
//! exact transpose of the discrete forward map with respect to the
//! discrete objective, which is what makes tight finite-difference
//! gradient checks possible downstream.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, pcg_solve, DirichletSet, SparseSpd};
use crate::mesh::{BoundaryTag, MeshId, TriMesh};

/// Analytic source with its spatial gradient, evaluated wherever the
/// assembly needs it.
pub trait SourceTerm: Send + Sync {
    fn value(&self, t: f64, x: [f64; 2]) -> f64;
    fn gradient(&self, t: f64, x: [f64; 2]) -> [f64; 2];
    /// Lets solvers skip source quadrature entirely.
    fn is_zero(&self) -> bool {
        false
    }
}

/// The experiment's source: identically zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSource;

impl SourceTerm for ZeroSource {
    fn value(&self, _t: f64, _x: [f64; 2]) -> f64 {
        0.0
    }
    fn gradient(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Source defined by a pair of closures.
pub struct FnSource<V, G>
where
    V: Fn(f64, [f64; 2]) -> f64 + Send + Sync,
    G: Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync,
{
    pub value: V,
    pub gradient: G,
}

impl<V, G> SourceTerm for FnSource<V, G>
where
    V: Fn(f64, [f64; 2]) -> f64 + Send + Sync,
    G: Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync,
{
    fn value(&self, t: f64, x: [f64; 2]) -> f64 {
        (self.value)(t, x)
    }
    fn gradient(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        (self.gradient)(t, x)
    }
}

/// Model parameters of the transmission problem.
#[derive(Clone)]
pub struct ModelData {
    /// Diffusivity in the exterior region.
    pub k1: f64,
    /// Diffusivity in the interior region.
    pub k2: f64,
    pub final_time: f64,
    pub n_steps: usize,
    /// Initial nodal state.
    pub y0: Vec<f64>,
    pub source: Arc<dyn SourceTerm>,
}

impl ModelData {
    /// Paper-style data: zero initial state and zero source.
    pub fn homogeneous(mesh: &TriMesh, k1: f64, k2: f64, final_time: f64, n_steps: usize) -> Self {
        ModelData {
            k1,
            k2,
            final_time,
            n_steps,
            y0: vec![0.0; mesh.num_vertices()],
            source: Arc::new(ZeroSource),
        }
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.n_steps as f64
    }

    fn validate(&self, mesh: &TriMesh) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::InvalidParameter("diffusivities must be positive".into()));
        }
        if !(self.final_time > 0.0) || self.n_steps == 0 {
            return Err(Error::InvalidParameter("need T > 0 and at least one time step".into()));
        }
        if self.y0.len() != mesh.num_vertices() {
            return Err(Error::Mismatch(format!(
                "initial state has {} values for {} vertices",
                self.y0.len(),
                mesh.num_vertices()
            )));
        }
        Ok(())
    }
}

/// Nodal scalar field per time step; index 0 is the initial time.
#[derive(Debug, Clone)]
pub struct TimeField {
    mesh_id: MeshId,
    pub dt: f64,
    pub steps: Vec<Vec<f64>>,
}

impl TimeField {
    pub fn new(mesh_id: MeshId, dt: f64, steps: Vec<Vec<f64>>) -> Self {
        TimeField { mesh_id, dt, steps }
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn check_aligned(&self, other: &TimeField) -> Result<()> {
        if self.mesh_id != other.mesh_id
            || self.steps.len() != other.steps.len()
            || self.dt != other.dt
        {
            return Err(Error::Mismatch("time fields on different meshes or time grids".into()));
        }
        Ok(())
    }
}

/// Spatial gradients of the observation interpolant at the mesh vertices,
/// one record per time step. Produced by the observation transfer, where
/// the containing target element of each vertex is known; consumed by the
/// shape-derivative assembly for the objective that re-evaluates the
/// observation at moved points.
#[derive(Debug, Clone)]
pub struct ObservationGradients {
    mesh_id: MeshId,
    pub steps: Vec<Vec<[f64; 2]>>,
}

impl ObservationGradients {
    pub fn new(mesh_id: MeshId, steps: Vec<Vec<[f64; 2]>>) -> Self {
        ObservationGradients { mesh_id, steps }
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }
}

/// Pre-assembled operators of one implicit Euler solve.
pub struct HeatSystem {
    pub mass: SparseSpd,
    pub system: SparseSpd,
    pub dt: f64,
}

impl HeatSystem {
    pub fn assemble(mesh: &TriMesh, data: &ModelData) -> Result<Self> {
        let mass = assemble_mass(mesh);
        let stiffness = assemble_stiffness(mesh, data.k1, data.k2)?;
        let dt = data.dt();
        let system = SparseSpd::linear_combination(1.0, &mass, dt, &stiffness)?;
        Ok(HeatSystem { mass, system, dt })
    }
}

fn top_dirichlet(mesh: &TriMesh, value: f64) -> Result<DirichletSet> {
    DirichletSet::new(
        mesh.num_vertices(),
        mesh.tagged_vertices(BoundaryTag::Top).into_iter().map(|v| (v, value)),
    )
}

fn pcg_budget(n: usize) -> usize {
    10 * n + 2000
}

/// State solve: `(M + dt K) y^n = M y^{n-1} + dt M f^n`, `y = 1` on the top
/// boundary and natural conditions on the rest.
pub fn solve_state(mesh: &TriMesh, data: &ModelData, rel_tol: f64) -> Result<TimeField> {
    data.validate(mesh)?;
    let sys = HeatSystem::assemble(mesh, data)?;
    let dirichlet = top_dirichlet(mesh, 1.0)?;
    let n = mesh.num_vertices();
    let dt = sys.dt;

    let mut steps = Vec::with_capacity(data.n_steps + 1);
    steps.push(data.y0.clone());
    let mut f_nodal = vec![0.0; n];
    for step in 1..=data.n_steps {
        let prev = steps.last().unwrap();
        let mut rhs = sys.mass.apply(prev);
        if !data.source.is_zero() {
            let t = dt * step as f64;
            for (v, p) in mesh.vertices.iter().enumerate() {
                f_nodal[v] = data.source.value(t, *p);
            }
            let mf = sys.mass.apply(&f_nodal);
            for i in 0..n {
                rhs[i] += dt * mf[i];
            }
        }
        let (y, _) = pcg_solve(&sys.system, &rhs, &dirichlet, rel_tol, pcg_budget(n))?;
        steps.push(y);
    }
    Ok(TimeField::new(mesh.id(), dt, steps))
}

/// Adjoint solve, the exact discrete transpose of [`solve_state`] for the
/// discrete tracking objective: backwards from `n = N`,
/// `(M + dt K) p^n = M p^{n+1} - dt M (y^n - ybar^n)` with `p = 0` on the
/// top boundary and `p^{N+1}` taken as zero. Slot 0 (paired with the fixed
/// initial state) is zero by convention.
pub fn solve_adjoint(
    mesh: &TriMesh,
    data: &ModelData,
    state: &TimeField,
    ybar: &TimeField,
    rel_tol: f64,
) -> Result<TimeField> {
    data.validate(mesh)?;
    state.check_aligned(ybar)?;
    if state.mesh_id() != mesh.id() {
        return Err(Error::Mismatch("state field lives on a different mesh".into()));
    }
    if state.n_steps() != data.n_steps {
        return Err(Error::Mismatch("state field and model disagree on step count".into()));
    }
    let sys = HeatSystem::assemble(mesh, data)?;
    let dirichlet = top_dirichlet(mesh, 0.0)?;
    let n = mesh.num_vertices();
    let dt = sys.dt;

    let mut steps = vec![vec![0.0; n]; data.n_steps + 1];
    let mut p_next = vec![0.0; n];
    for step in (1..=data.n_steps).rev() {
        let mut work = vec![0.0; n];
        for i in 0..n {
            work[i] = state.steps[step][i] - ybar.steps[step][i];
        }
        let m_mismatch = sys.mass.apply(&work);
        let mut rhs = sys.mass.apply(&p_next);
        for i in 0..n {
            rhs[i] -= dt * m_mismatch[i];
        }
        let (p, _) = pcg_solve(&sys.system, &rhs, &dirichlet, rel_tol, pcg_budget(n))?;
        steps[step] = p.clone();
        p_next = p;
    }
    Ok(TimeField::new(mesh.id(), dt, steps))
}

/// Objective values: `tracking` is the right-endpoint time quadrature of
/// the squared mismatch in the mass norm (with the 1/2 matching the
/// derivative formula), `total` adds the perimeter penalty.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveValue {
    pub total: f64,
    pub tracking: f64,
    pub perimeter: f64,
}

pub fn objective(
    mesh: &TriMesh,
    state: &TimeField,
    ybar: &TimeField,
    mu_reg: f64,
) -> Result<ObjectiveValue> {
    state.check_aligned(ybar)?;
    if state.mesh_id() != mesh.id() {
        return Err(Error::Mismatch("state field lives on a different mesh".into()));
    }
    let mass = assemble_mass(mesh);
    let n = mesh.num_vertices();
    let dt = state.dt;
    let mut tracking = 0.0;
    let mut work = vec![0.0; n];
    for step in 1..state.steps.len() {
        for i in 0..n {
            work[i] = state.steps[step][i] - ybar.steps[step][i];
        }
        tracking += 0.5 * dt * mass.inner(&work, &work);
    }
    let perimeter = mesh.interface_perimeter();
    Ok(ObjectiveValue { total: tracking + mu_reg * perimeter, tracking, perimeter })
}
