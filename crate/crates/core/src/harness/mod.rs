//! Experiment driver: target-data generation, single-method runs, method
//! comparisons and artifact output.

pub mod config;
pub mod experiment;

pub use config::{ExperimentConfig, ShapeProfile};
pub use experiment::{
    compare_methods, distance_to_target, generate_target_data, run_experiment,
    transfer_observation, transfer_observation_with_gradients, ExitStatus, RunSummary,
    TargetData,
};
