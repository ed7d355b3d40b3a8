//! Scenario runner: JSON configuration, the five experiments and their
//! CSV/JSON outputs.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, Engine, ResolvedConfig, ScenarioConfig, ScenarioKind};
pub use output::{format_float, parse_csv, parse_timeseries, read_timeseries, write_timeseries, FileEntry, Table};
pub use runner::{run_scenario, RunSummary, THREADS_ENV};
