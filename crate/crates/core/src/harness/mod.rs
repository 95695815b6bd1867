//! Experiment orchestration: configuration, the data → regime → geometry →
//! posterior → limit → TV pipeline, report emission and the CLI.

pub mod cli;
pub mod config;
pub mod emit;
pub mod run;

pub use cli::run_cli;
pub use config::{mix_seed, ComponentConfig, ExperimentConfig, GridSettings};
pub use run::{
    build_grid, density_slices, geometry_dossier, prepare, run_experiment, ExperimentOutput,
    ExperimentRow, ExperimentSummary, GeometryDossier, PipelineContext,
};
