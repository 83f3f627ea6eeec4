//! Scenario runner for random rotations of Brownian paths: configuration
//! parsing, the experiment scenarios and CSV/summary output.

pub mod config;
pub mod output;
pub mod scenarios;

pub use config::{parse_config, parse_with_overrides, Scenario, ScenarioConfig};
pub use output::{RunReport, TestResult};
pub use scenarios::{run_scenario, RunError};
