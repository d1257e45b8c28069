//! Command-line front end for the adaptive-randomization trial simulator:
//! configuration ingestion, scenario presets, operating-characteristic runs,
//! numerical verification runs, and CSV emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod presets;
pub mod report;

pub use commands::{
    execute_run, execute_verify, theorem1_sweep, weight_grid, RunOptions, RunSource, VerifyArgs,
    VerifyOutcome,
};
pub use config::{parse_config, parse_config_str};
pub use error::CliError;
pub use presets::{expand, null_rate_grid, PresetName, PresetRun, PRESET_NAMES};
pub use report::{config_digest, null_scan_csv, oc_report_csv, trajectories_csv, RunRecord};
