//! Scenario runner for closure tests: loads scenario configs and level
//! tables, runs static propagation or full simulations, and writes
//! `report.json` plus plot-ready CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{LoadedConfig, Mode, ScenarioConfig};
pub use error::{exit, CliError};
pub use runner::{run_scenario, RunOptions, RunOutcome, Scenario, SimulationRun, TransitionRun};

/// Finds a scenario file by path or by name among the bundled scenarios;
/// a missing `.toml` extension is added.
pub fn locate_config(path: &std::path::Path) -> Result<std::path::PathBuf, CliError> {
    data::resolve(path, None, "scenarios")
        .or_else(|| {
            (path.extension().is_none()).then(|| data::resolve(&path.with_extension("toml"), None, "scenarios")).flatten()
        })
        .ok_or_else(|| CliError::config(path.display().to_string(), "(file)", "scenario file not found"))
}
