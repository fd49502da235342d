//! Configuration handling and experiment drivers behind the `cavity-soliton`
//! binary.

pub mod config;
pub mod experiments;

pub use config::{load_spec, CliError, ConfigFile, Experiment, ExperimentSpec};
pub use experiments::{run_experiment, Manifest};
