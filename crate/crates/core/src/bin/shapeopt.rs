//! Experiment driver for the interface-identification toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shapeopt::harness::{
    compare_methods, generate_target_data, run_experiment, ExperimentConfig, ShapeProfile,
};
use shapeopt::mesh::{generate_interface_mesh, load_t2m, save_t2m, save_vtk, VtkField};
use shapeopt::optimizer::Method;

#[derive(Parser)]
#[command(
    name = "shapeopt",
    about = "Identify an interior interface from heat observations by shape optimization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Configuration file (TOML sections per module); defaults apply when
    /// omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override single entries, e.g. --set model.k2=0.01
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; overrides the config entry.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> shapeopt::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut config = base.with_overrides(&self.set)?;
        if let Some(dir) = &self.out {
            config.output.directory = dir.display().to_string();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the target observation data and write it out.
    Target(ConfigArgs),
    /// Run a single optimization.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Optimization method; overrides the config entry.
        #[arg(short, long)]
        method: Option<String>,
    },
    /// Run several methods on identical data and write a comparison table.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated method list.
        #[arg(short, long, default_value = "lbfgs,gradient")]
        methods: String,
    },
    /// Generate or inspect meshes.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
    /// Print the effective configuration (defaults plus overrides).
    Config(ConfigArgs),
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a mesh for a radial profile.
    Generate {
        /// Profile, e.g. "circle 0.5", "ellipse 0.6 0.4", "star 0.35 0.1 3".
        #[arg(short, long)]
        shape: String,
        #[arg(short, long, default_value_t = 0.1)]
        edge_length: f64,
        /// Output path for the native format.
        #[arg(short, long)]
        out: PathBuf,
        /// Optional VTK copy for viewers.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Validate a mesh file and print its statistics.
    Info { path: PathBuf },
}

fn run() -> shapeopt::Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Target(args) => {
            let config = args.load()?;
            let target = generate_target_data(&config)?;
            let dir = PathBuf::from(&config.output.directory);
            std::fs::create_dir_all(&dir)?;
            save_t2m(&target.mesh, &dir.join("target_mesh.t2m"))?;
            let last = target.ybar.steps.last().unwrap();
            save_vtk(
                &target.mesh,
                &[VtkField::Scalar("ybar_final", last)],
                &dir.join("target_mesh.vtk"),
            )?;
            println!(
                "target data: {} vertices, {} cells, {} time steps -> {}",
                target.mesh.num_vertices(),
                target.mesh.num_triangles(),
                target.ybar.n_steps(),
                dir.display()
            );
            Ok(0)
        }
        Command::Run { config, method } => {
            let mut cfg = config.load()?;
            if let Some(m) = method {
                m.parse::<Method>()?;
                cfg.optimizer.method = m;
            }
            let (status, summary) = run_experiment(&cfg)?;
            println!(
                "{}: {} iterations, J {:.6e}, distance {:.6e} (from {:.6e}), {}",
                summary.method,
                summary.iterations,
                summary.final_objective,
                summary.final_distance,
                summary.initial_distance,
                if summary.diverged { "diverged" } else { "converged" }
            );
            println!("outputs in {}", cfg.output.directory);
            Ok(status.code())
        }
        Command::Compare { config, methods } => {
            let cfg = config.load()?;
            let parsed: Vec<Method> = methods
                .split(',')
                .map(|m| m.trim().parse())
                .collect::<shapeopt::Result<_>>()?;
            let (status, path) = compare_methods(&cfg, &parsed)?;
            println!("comparison table: {}", path.display());
            Ok(status.code())
        }
        Command::Mesh { command } => match command {
            MeshCommand::Generate { shape, edge_length, out, vtk } => {
                let profile = ShapeProfile::parse(&shape)?;
                let mesh = generate_interface_mesh(|t| profile.radius(t), edge_length)?;
                save_t2m(&mesh, &out)?;
                if let Some(vtk_path) = vtk {
                    save_vtk(&mesh, &[], &vtk_path)?;
                }
                println!(
                    "{}: {} vertices, {} cells, min quality {:.3}",
                    out.display(),
                    mesh.num_vertices(),
                    mesh.num_triangles(),
                    mesh.min_quality()
                );
                Ok(0)
            }
            MeshCommand::Info { path } => {
                let mesh = load_t2m(&path)?;
                mesh.check_region_consistency()?;
                println!("vertices:        {}", mesh.num_vertices());
                println!("triangles:       {}", mesh.num_triangles());
                println!("boundary edges:  {}", mesh.boundary_edges.len());
                println!("interface loop:  {} vertices", mesh.interface_loop.len());
                println!("perimeter:       {:.6}", mesh.interface_perimeter());
                println!("min quality:     {:.4}", mesh.min_quality());
                Ok(0)
            }
        },
        Command::Config(args) => {
            let config = args.load()?;
            print!("{}", config.to_toml()?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
