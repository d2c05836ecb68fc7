//! Scenario files, presets, artifact writers and sweeps for the
//! `multistrain` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{build_scenario, load_config, parse_config, Overrides, Scenario, ScenarioConfig};
pub use error::CliError;
pub use run::{run_scenario, sweep, Mode, RunOutcome};
