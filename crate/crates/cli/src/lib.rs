//! Command-line front end for `cbo-games`: configuration parsing, experiment
//! dispatch and report output.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, split_overrides, Experiment, RunConfig};
pub use error::{CliError, Result};
pub use run::{execute, write_outputs};
