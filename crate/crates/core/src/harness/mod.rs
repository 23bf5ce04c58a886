//! Data generation, file formats and experiment orchestration.

pub mod experiment;
pub mod io;
pub mod planted;

pub use experiment::{compare, run_experiment, run_trials, write_artifacts, ArtifactPaths, Experiment, ExperimentOptions};
pub use io::{load_dataset, save_dataset, DataFormat};
pub use planted::{generate_planted, PlantedInstance, PlantedParams};
