//! Batch front-end for the Urysohn solver: TOML run configs, mode drivers,
//! CSV solutions and JSON reports.

pub mod config;
pub mod run;

pub use config::{load_config, parse_config, parse_with, ConfigError, FieldError, Mode, Overrides, RunConfig, SignChoice};
pub use run::{run, CliError, RunOutcome};
