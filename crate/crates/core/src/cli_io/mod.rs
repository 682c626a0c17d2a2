//! Experiment definitions, replica fan-out, output files and reports.

mod config;
mod experiment;
mod report;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind};
pub use experiment::{
    config_hash, run_experiment, CoalescenceStats, GateRecord, OutputFile, RunManifest, MANIFEST_FILE,
};
pub use report::{report, report_dir, Summary};
