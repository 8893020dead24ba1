//! End-to-end experiment orchestration and file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{P1Element, PointLocator};
use crate::harness::config::{ExperimentConfig, ShapeProfile};
use crate::mesh::{generate_interface_mesh, save_t2m, save_vtk, TriMesh};
use crate::optimizer::{run_optimization, IterateRecord, Method, OptimizationOutcome, StopReason};
use crate::parabolic::{solve_state, ModelData, ObservationGradients, TimeField};

/// Observation data: the mesh it was computed on, the transient solution,
/// and the profile the interface distance is measured against.
pub struct TargetData {
    pub mesh: TriMesh,
    pub ybar: TimeField,
    pub profile: ShapeProfile,
}

/// Builds artificial observation data by solving the state equation on a
/// mesh of the target geometry. Its resolution is configured separately,
/// so transfers always cross non-matching grids.
pub fn generate_target_data(config: &ExperimentConfig) -> Result<TargetData> {
    let profile = config.mesh.target_shape.clone();
    let mesh = generate_interface_mesh(|t| profile.radius(t), config.mesh.target_edge_length)?;
    let data = ModelData::homogeneous(
        &mesh,
        config.model.k1,
        config.model.k2,
        config.model.final_time,
        config.model.n_steps,
    );
    let ybar = solve_state(&mesh, &data, config.solver.pcg_tol)?;
    Ok(TargetData { mesh, ybar, profile })
}

/// Interpolates the observation onto a mesh: every vertex is located once
/// in the target mesh, then all time steps are evaluated with the cached
/// barycentric weights. Also returns the observation interpolant's
/// spatial gradient at every vertex (constant within the containing
/// target element), which the shape-derivative assembly needs.
pub fn transfer_observation_with_gradients(
    target: &TargetData,
    mesh: &TriMesh,
) -> Result<(TimeField, ObservationGradients)> {
    let locator = PointLocator::new(&target.mesh);
    let mut hits = Vec::with_capacity(mesh.num_vertices());
    for p in &mesh.vertices {
        let (t, lambda) = locator.locate(*p)?;
        hits.push((t, target.mesh.triangles[t], lambda));
    }
    let elements: std::collections::HashMap<usize, P1Element> = hits
        .iter()
        .map(|(t, _, _)| (*t, P1Element::from_mesh(&target.mesh, *t)))
        .collect();
    let mut steps = Vec::with_capacity(target.ybar.steps.len());
    let mut grad_steps = Vec::with_capacity(target.ybar.steps.len());
    for step in &target.ybar.steps {
        let mut values = Vec::with_capacity(hits.len());
        let mut grads = Vec::with_capacity(hits.len());
        for (t, tri, lambda) in &hits {
            values.push(lambda[0] * step[tri[0]] + lambda[1] * step[tri[1]] + lambda[2] * step[tri[2]]);
            grads.push(elements[t].field_gradient(tri.map(|v| step[v])));
        }
        steps.push(values);
        grad_steps.push(grads);
    }
    Ok((
        TimeField::new(mesh.id(), target.ybar.dt, steps),
        ObservationGradients::new(mesh.id(), grad_steps),
    ))
}

/// Observation values only; see [`transfer_observation_with_gradients`].
pub fn transfer_observation(target: &TargetData, mesh: &TriMesh) -> Result<TimeField> {
    Ok(transfer_observation_with_gradients(target, mesh)?.0)
}

/// Root-mean-square radial mismatch of the interface against the target
/// profile; a computable surrogate for the shape-space distance (which
/// the experiment never needs in exact form).
pub fn distance_to_target(mesh: &TriMesh, profile: &ShapeProfile) -> f64 {
    let mut acc = 0.0;
    for &v in &mesh.interface_loop {
        let [x, y] = mesh.vertices[v];
        let r = (x * x + y * y).sqrt();
        let theta = y.atan2(x);
        acc += (r - profile.radius(theta)).powi(2);
    }
    (acc / mesh.interface_loop.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Diverged,
    Failed,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Diverged => 1,
            ExitStatus::Failed => 2,
        }
    }
}

/// Deterministic run summary; wall time goes to a separate timing file so
/// every summary byte reproduces across reruns.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_tracking: f64,
    pub final_distance: f64,
    pub initial_distance: f64,
    pub diverged: bool,
    pub stop: String,
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::GradientTolerance => "gradient_tolerance",
        StopReason::MaxIterations => "max_iterations",
        StopReason::Stalled => "stalled",
    }
}

fn write_convergence_csv(path: &Path, records: &[IterateRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", IterateRecord::CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots convergence.csv (or compare.csv) from the same directory."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "convergence.csv")
with open(path) as fh:
    rows = list(csv.DictReader(fh))
iters = [int(r["iter"]) for r in rows]
fig, axes = plt.subplots(1, 2, figsize=(11, 4))
dist_cols = [c for c in rows[0] if c.startswith("distance")]
for col in dist_cols:
    axes[0].semilogy(iters, [float(r[col]) for r in rows], marker="o", label=col)
axes[0].set_xlabel("iteration")
axes[0].set_ylabel("distance to target")
axes[0].legend()
j_cols = [c for c in rows[0] if c == "J" or c.startswith("J_")]
for col in j_cols:
    axes[1].semilogy(iters, [float(r[col]) for r in rows], marker=".", label=col)
axes[1].set_xlabel("iteration")
axes[1].set_ylabel("objective")
axes[1].legend()
fig.tight_layout()
out = os.path.splitext(path)[0] + ".png"
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"#;

fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    outcome: &OptimizationOutcome,
    target: &TargetData,
    elapsed_seconds: f64,
) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    write_convergence_csv(&dir.join("convergence.csv"), &outcome.records)?;
    for (iter, mesh) in &outcome.snapshots {
        save_vtk(mesh, &[], &dir.join(format!("it{iter:04}.vtk")))?;
    }
    save_t2m(&outcome.final_mesh, &dir.join("final_mesh.t2m"))?;
    save_vtk(&target.mesh, &[], &dir.join("target_mesh.vtk"))?;
    fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;

    let last = outcome.records.last();
    let summary = RunSummary {
        method: config.optimizer.method.clone(),
        iterations: outcome.records.len(),
        final_objective: last.map(|r| r.objective).unwrap_or(f64::NAN),
        final_tracking: last.map(|r| r.tracking).unwrap_or(f64::NAN),
        final_distance: outcome
            .records
            .last()
            .map(|r| r.distance)
            .unwrap_or(f64::NAN),
        initial_distance: outcome
            .records
            .first()
            .map(|r| r.distance)
            .unwrap_or(f64::NAN),
        diverged: outcome.diverged,
        stop: stop_name(outcome.stop).to_string(),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    fs::write(dir.join("summary.json"), json)?;
    fs::write(dir.join("timing.txt"), format!("wall_time_seconds = {elapsed_seconds:.3}\n"))?;
    Ok(summary)
}

/// Runs one experiment end to end and writes `convergence.csv`, mesh
/// snapshots `it####.vtk`, the final mesh, a summary and a plot script
/// into the output directory. Partial outputs are kept on failure.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExitStatus, RunSummary)> {
    let start = Instant::now();
    let method: Method = config.optimizer.method.parse()?;
    let dir = PathBuf::from(&config.output.directory);
    let target = generate_target_data(config)?;
    let outcome = run_optimization(config, method, &target)?;
    let summary = write_outputs(&dir, config, &outcome, &target, start.elapsed().as_secs_f64())?;
    let status = if outcome.diverged { ExitStatus::Diverged } else { ExitStatus::Success };
    Ok((status, summary))
}

/// Runs several methods from the identical initial mesh and target data;
/// writes one distance/objective column pair per method on a shared
/// iteration axis to `compare.csv`.
pub fn compare_methods(
    config: &ExperimentConfig,
    methods: &[Method],
) -> Result<(ExitStatus, PathBuf)> {
    if methods.len() < 2 {
        return Err(Error::Config("compare needs at least two methods".into()));
    }
    let dir = PathBuf::from(&config.output.directory);
    fs::create_dir_all(&dir)?;
    let target = generate_target_data(config)?;
    let initial = generate_interface_mesh(
        |t| config.mesh.initial_shape.radius(t),
        config.mesh.edge_length,
    )?;

    let mut outcomes = Vec::new();
    for &method in methods {
        let outcome =
            crate::optimizer::run_from_mesh(config, method, &target, initial.clone())?;
        outcomes.push((method, outcome));
    }

    let rows = outcomes.iter().map(|(_, o)| o.records.len()).max().unwrap_or(0);
    let path = dir.join("compare.csv");
    let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
    let mut header = String::from("iter");
    for (m, _) in &outcomes {
        header.push_str(&format!(",distance_{m},J_{m}"));
    }
    writeln!(w, "{header}")?;
    for i in 0..rows {
        let mut row = format!("{i}");
        for (_, outcome) in &outcomes {
            // Methods that stopped early repeat their final row, keeping
            // the iteration axis shared.
            let r = outcome.records.get(i).or_else(|| outcome.records.last()).unwrap();
            row.push_str(&format!(",{},{}", r.distance, r.objective));
        }
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;

    let any_diverged = outcomes.iter().any(|(_, o)| o.diverged);
    Ok((if any_diverged { ExitStatus::Diverged } else { ExitStatus::Success }, path))
}
