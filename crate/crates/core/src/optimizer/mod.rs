//! The outer optimization loop: limited-memory BFGS (plus full BFGS and
//! plain gradient descent) over shape deformations, in the volume and the
//! surface formulation, with step safeguards and regularization
//! continuation.

mod lbfgs;

pub use lbfgs::{LbfgsMemory, TangentVector};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{
    distance_to_target, transfer_observation_with_gradients, TargetData,
};
use crate::mesh::{apply_deformation, DeformField, TriMesh};
use crate::parabolic::{
    objective, solve_adjoint, solve_state, ModelData, ObjectiveValue, ObservationGradients,
    TimeField,
};
use crate::shape_calculus::{
    assemble_domain_derivative, assemble_perimeter_load, boundary_edge_density,
};
use crate::steklov::{assemble_elasticity, injectivity_margin, metric_identity_defect};
use crate::surface::{dirichlet_deformation, CurveSystem};

/// Optimization method; the `surface_` variants use the Hadamard density
/// with the Sobolev curve metric, the others the volume form with the
/// elasticity metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lbfgs,
    FullBfgs,
    Gradient,
    SurfaceLbfgs,
    SurfaceGradient,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lbfgs => "lbfgs",
            Method::FullBfgs => "full_bfgs",
            Method::Gradient => "gradient",
            Method::SurfaceLbfgs => "surface_lbfgs",
            Method::SurfaceGradient => "surface_gradient",
        }
    }

    pub fn is_surface(self) -> bool {
        matches!(self, Method::SurfaceLbfgs | Method::SurfaceGradient)
    }

    fn uses_memory(self) -> bool {
        !matches!(self, Method::Gradient | Method::SurfaceGradient)
    }

    /// Memory capacity handed to the ring buffer; 0 means unbounded.
    fn capacity(self, configured: usize) -> usize {
        match self {
            Method::Lbfgs | Method::SurfaceLbfgs => configured.max(1),
            Method::FullBfgs => 0,
            Method::Gradient | Method::SurfaceGradient => 1,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lbfgs" => Method::Lbfgs,
            "full_bfgs" => Method::FullBfgs,
            "gradient" => Method::Gradient,
            "surface_lbfgs" => Method::SurfaceLbfgs,
            "surface_gradient" => Method::SurfaceGradient,
            other => return Err(Error::Config(format!("unknown method {other:?}"))),
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of the convergence log.
#[derive(Debug, Clone, Copy)]
pub struct IterateRecord {
    pub iter: usize,
    pub objective: f64,
    pub tracking: f64,
    pub perimeter: f64,
    pub distance: f64,
    /// Accepted step scale; 0 when every trial was rejected.
    pub step: f64,
    pub grad_norm: f64,
    pub min_quality: f64,
}

impl IterateRecord {
    pub const CSV_HEADER: &'static str =
        "iter,J,j_track,perimeter,distance,step,gradnorm,minquality";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iter,
            self.objective,
            self.tracking,
            self.perimeter,
            self.distance,
            self.step,
            self.grad_norm,
            self.min_quality
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// Three consecutive iterations without an acceptable step.
    Stalled,
}

pub struct OptimizationOutcome {
    pub records: Vec<IterateRecord>,
    pub final_mesh: TriMesh,
    pub stop: StopReason,
    pub diverged: bool,
    /// Meshes kept for snapshot output (iteration index, mesh).
    pub snapshots: Vec<(usize, TriMesh)>,
}

/// Geometric interpolation from `mu_init` down to `mu_final` over
/// `decay_iters` iterations, constant afterwards. Falls back to linear
/// interpolation when either endpoint is nonpositive.
pub fn regularization_schedule(
    iter: usize,
    mu_init: f64,
    mu_final: f64,
    decay_iters: usize,
) -> f64 {
    if iter >= decay_iters {
        return mu_final;
    }
    let t = iter as f64 / decay_iters as f64;
    if mu_init > 0.0 && mu_final > 0.0 {
        mu_init * (mu_final / mu_init).powf(t)
    } else {
        mu_init + t * (mu_final - mu_init)
    }
}

const SNAPSHOT_ITERS: [usize; 4] = [0, 2, 4, 20];
/// Step cap through the injectivity bound: scale <= 0.5 / margin.
const INJECTIVITY_FRACTION: f64 = 0.5;
const ARMIJO_SLOPE: f64 = 1e-4;
const ARMIJO_MAX_TRIALS: usize = 8;
const MAX_REJECTED_ITERS: usize = 3;

/// Shared per-iteration state of both formulations.
struct IterationState {
    ybar: TimeField,
    obs_grad: ObservationGradients,
    state: TimeField,
    obj: ObjectiveValue,
}

fn model_for(config: &ExperimentConfig, mesh: &TriMesh) -> ModelData {
    ModelData::homogeneous(
        mesh,
        config.model.k1,
        config.model.k2,
        config.model.final_time,
        config.model.n_steps,
    )
}

fn evaluate(
    config: &ExperimentConfig,
    target: &TargetData,
    mesh: &TriMesh,
    mu: f64,
) -> Result<IterationState> {
    let (ybar, obs_grad) = transfer_observation_with_gradients(target, mesh)?;
    let data = model_for(config, mesh);
    let state = solve_state(mesh, &data, config.solver.pcg_tol)?;
    let obj = objective(mesh, &state, &ybar, mu)?;
    Ok(IterationState { ybar, obs_grad, state, obj })
}

/// Runs the optimization loop for one method. The target data is passed
/// in so method comparisons share identical observations.
pub fn run_optimization(
    config: &ExperimentConfig,
    method: Method,
    target: &TargetData,
) -> Result<OptimizationOutcome> {
    let initial_profile = &config.mesh.initial_shape;
    let mesh = crate::mesh::generate_interface_mesh(
        |theta| initial_profile.radius(theta),
        config.mesh.edge_length,
    )?;
    run_from_mesh(config, method, target, mesh)
}

/// Same as [`run_optimization`] but starting from an explicit mesh.
pub fn run_from_mesh(
    config: &ExperimentConfig,
    method: Method,
    target: &TargetData,
    mut mesh: TriMesh,
) -> Result<OptimizationOutcome> {
    let tol = config.solver.pcg_tol;
    let mut volume_memory: LbfgsMemory<DeformField> =
        LbfgsMemory::new(method.capacity(config.optimizer.memory));
    let mut surface_memory: LbfgsMemory<Vec<f64>> =
        LbfgsMemory::new(method.capacity(config.optimizer.memory));
    // Gradient fields of the previous iterate and the last accepted step,
    // for the (S, Y) pair assembled once the new gradient is known.
    let mut prev_volume: Option<(DeformField, DeformField)> = None;
    let mut prev_surface: Option<(Vec<f64>, Vec<f64>)> = None;

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut rejected_in_a_row = 0usize;
    let mut cached: Option<IterationState> = None;
    let mut stop = StopReason::MaxIterations;

    let mut iter = 0usize;
    while iter < config.optimizer.max_iterations {
        let mu = regularization_schedule(
            iter,
            config.regularization.mu_init,
            config.regularization.mu,
            config.regularization.decay_iters,
        );
        let cur = match cached.take() {
            // The cached state carries the previous iteration's mu; the
            // objective is cheap to recompute from the cached fields.
            Some(sc) => IterationState {
                obj: objective(&mesh, &sc.state, &sc.ybar, mu)?,
                ybar: sc.ybar,
                obs_grad: sc.obs_grad,
                state: sc.state,
            },
            None => evaluate(config, target, &mesh, mu)?,
        };
        let data = model_for(config, &mesh);
        let adjoint = solve_adjoint(&mesh, &data, &cur.state, &cur.ybar, tol)?;
        let op = assemble_elasticity(&mesh, config.elasticity.young, config.elasticity.poisson)?;

        // Gradient representation and search direction per formulation.
        let (direction, grad_norm, slope): (DeformField, f64, f64) = if method.is_surface() {
            let sys = CurveSystem::on_interface(&mesh, config.sobolev.a_param)?;
            let raw = boundary_edge_density(&mesh, &data, &cur.state, &adjoint)?;
            let projected = sys.project_edge_values(&raw)?;
            let geometry = crate::mesh::interface_geometry(&mesh)?;
            let density: Vec<f64> = projected
                .iter()
                .zip(&geometry)
                .map(|(s, g)| s + mu * g.curvature)
                .collect();
            let grad = sys.sobolev_representation(&density)?;
            let grad_norm = sys.inner(&grad, &grad).max(0.0).sqrt();

            if let Some((g_prev, s_prev)) = prev_surface.take() {
                let y: Vec<f64> = grad.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
                surface_memory.update(s_prev, y, |a, b| sys.inner(a, b));
            }
            let mut dir_density = if method.uses_memory() {
                surface_memory.direction(&grad, |a, b| sys.inner(a, b))
            } else {
                grad.clone()
            };
            // Descent safeguard in the curve metric.
            let mut dd = -sys.mass.inner(&density, &dir_density);
            if !(dd < 0.0) && method.uses_memory() && !surface_memory.is_empty() {
                surface_memory.clear();
                dir_density = grad.clone();
                dd = -sys.mass.inner(&density, &dir_density);
            }
            for v in dir_density.iter_mut() {
                *v = -*v;
            }
            let field = dirichlet_deformation(&op, &mesh, &dir_density, tol)?;
            prev_surface = Some((grad, dir_density));
            (field, grad_norm, dd)
        } else {
            let domain = assemble_domain_derivative(
                &mesh,
                &data,
                &cur.state,
                &adjoint,
                &cur.ybar,
                Some(&cur.obs_grad),
                config.optimizer.restrict,
            )?;
            let perimeter_load = assemble_perimeter_load(&mesh, mu)?;
            let mut load = domain.add(&perimeter_load)?;
            if config.optimizer.restrict {
                // Off-loop rows are zero-trace noise; see
                // ShapeLoad::restrict_to_interface.
                load = load.restrict_to_interface(&mesh)?;
            }
            let grad = op.solve_representation(&load, tol)?;
            if config.optimizer.metric_check {
                let defect = metric_identity_defect(&op, &grad, &load, 10, config.output.seed)?;
                let load_norm =
                    load.values.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>().sqrt();
                if defect > 100.0 * tol * load_norm.max(1e-300) {
                    return Err(Error::Mismatch(format!(
                        "metric identity violated at iteration {iter}: defect {defect:.3e} vs load norm {load_norm:.3e}"
                    )));
                }
            }
            let grad_norm = op.norm(&grad)?;

            volume_memory.transport_pairs(|v| v.rebind(mesh.id()));
            if let Some((g_prev, s_prev)) = prev_volume.take() {
                let mut y = grad.clone();
                y.axpy(-1.0, &transport(&g_prev, &mesh)?);
                volume_memory.update(s_prev, y, |a, b| op.inner(a, b).expect("same mesh"));
            }
            let mut dir = if method.uses_memory() {
                volume_memory.direction(&grad, |a, b| op.inner(a, b).expect("same mesh"))
            } else {
                grad.clone()
            };
            let mut dd = -op.inner(&grad, &dir)?;
            if !(dd < 0.0) && method.uses_memory() && !volume_memory.is_empty() {
                volume_memory.clear();
                dir = grad.clone();
                dd = -op.inner(&grad, &dir)?;
            }
            dir.scale(-1.0);
            prev_volume = Some((grad, DeformField::zeros(&mesh)));
            (dir, grad_norm, dd)
        };

        let distance = distance_to_target(&mesh, &target.profile);
        let min_quality = mesh.min_quality();
        if snapshots.is_empty() || SNAPSHOT_ITERS.contains(&iter) {
            if !snapshots.iter().any(|(i, _)| *i == iter) {
                snapshots.push((iter, mesh.clone()));
            }
        }

        if grad_norm <= config.optimizer.grad_tol {
            records.push(IterateRecord {
                iter,
                objective: cur.obj.total,
                tracking: cur.obj.tracking,
                perimeter: cur.obj.perimeter,
                distance,
                step: 0.0,
                grad_norm,
                min_quality,
            });
            stop = StopReason::GradientTolerance;
            break;
        }

        // Step safeguard: injectivity bound first, then inversion checks
        // and optional Armijo backtracking, sharing the same trial loop.
        let margin = injectivity_margin(&mesh, &direction)?;
        let mut scale = if margin > 0.0 { (INJECTIVITY_FRACTION / margin).min(1.0) } else { 1.0 };
        let mut accepted: Option<(TriMesh, IterationState, f64)> = None;
        for _ in 0..ARMIJO_MAX_TRIALS {
            match apply_deformation(&mesh, &direction, scale) {
                Err(_) => {
                    scale *= 0.5;
                    continue;
                }
                Ok(moved) => {
                    if !config.optimizer.armijo {
                        let next = evaluate(config, target, &moved, mu)?;
                        accepted = Some((moved, next, scale));
                        break;
                    }
                    let next = evaluate(config, target, &moved, mu)?;
                    if next.obj.total <= cur.obj.total + ARMIJO_SLOPE * scale * slope {
                        accepted = Some((moved, next, scale));
                        break;
                    }
                    scale *= 0.5;
                }
            }
        }

        match accepted {
            Some((moved, next, step)) => {
                records.push(IterateRecord {
                    iter,
                    objective: cur.obj.total,
                    tracking: cur.obj.tracking,
                    perimeter: cur.obj.perimeter,
                    distance,
                    step,
                    grad_norm,
                    min_quality,
                });
                // The accepted step, transported to the new mesh, joins the
                // pending gradient for the next (S, Y) pair.
                if !method.is_surface() {
                    if let Some((grad, _)) = prev_volume.take() {
                        let mut s_field = direction.clone();
                        s_field.scale(step);
                        prev_volume = Some((
                            transport(&grad, &moved)?,
                            transport(&s_field, &moved)?,
                        ));
                    }
                } else if let Some((grad, dir_density)) = prev_surface.take() {
                    let s_density: Vec<f64> = dir_density.iter().map(|v| v * step).collect();
                    prev_surface = Some((grad, s_density));
                }
                mesh = moved;
                cached = Some(next);
                rejected_in_a_row = 0;
            }
            None => {
                records.push(IterateRecord {
                    iter,
                    objective: cur.obj.total,
                    tracking: cur.obj.tracking,
                    perimeter: cur.obj.perimeter,
                    distance,
                    step: 0.0,
                    grad_norm,
                    min_quality,
                });
                rejected_in_a_row += 1;
                volume_memory.clear();
                surface_memory.clear();
                prev_volume = None;
                prev_surface = None;
                cached = Some(cur);
                if rejected_in_a_row >= MAX_REJECTED_ITERS {
                    stop = StopReason::Stalled;
                    break;
                }
            }
        }
        iter += 1;
    }

    let final_iter = records.last().map(|r| r.iter).unwrap_or(0);
    if !snapshots.iter().any(|(i, _)| *i == final_iter) {
        snapshots.push((final_iter, mesh.clone()));
    }
    let diverged = assess_divergence(&records, stop);
    Ok(OptimizationOutcome { records, final_mesh: mesh, stop, diverged, snapshots })
}

/// Identity vector transport onto a connectivity-sharing mesh: nodal
/// coefficients persist, only the mesh binding changes.
pub fn transport(field: &DeformField, to_mesh: &TriMesh) -> Result<DeformField> {
    if field.values.len() != to_mesh.num_vertices() {
        return Err(Error::Mismatch("transport between different connectivities".into()));
    }
    Ok(DeformField::from_raw(to_mesh.id(), field.values.clone()))
}

/// A run is flagged diverged when mesh quality collapsed or the objective
/// failed to make headway in the first ten iterations (or before
/// stalling).
fn assess_divergence(records: &[IterateRecord], stop: StopReason) -> bool {
    let Some(first) = records.first() else {
        return false;
    };
    let quality_collapse =
        records.iter().any(|r| r.min_quality < 0.3 * first.min_quality);
    let rel_drop = |until: usize| -> f64 {
        let best = records
            .iter()
            .take(until + 1)
            .map(|r| r.objective)
            .fold(f64::INFINITY, f64::min);
        (first.objective - best) / first.objective.abs().max(1e-300)
    };
    let early_stagnation = records.len() > 10 && rel_drop(10) < 1e-3;
    let stalled_without_progress =
        stop == StopReason::Stalled && rel_drop(records.len()) < 1e-3;
    quality_collapse || early_stagnation || stalled_without_progress
}
