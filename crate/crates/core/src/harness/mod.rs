//! Experiment orchestration: configuration and profiles, seeded runs,
//! parameter sweeps, comparisons and file output.

mod config;
pub mod emit;
pub mod plot;
mod run;
mod sweep;

pub use config::{ConfigOverrides, DatasetConfig, ExperimentConfig, Profile, Task};
pub use run::{prepare_dataset, run_single, train_network};
pub use sweep::{compare, network_size_sweep, run_sweep, Comparison, SettingResult, SizeAxis, SizeRow, SweepResult};
