//! Drivers that regenerate the grid-state tables and figure data as CSV and
//! JSON files. The `gridstates` binary is a thin wrapper around [`runs::run`]
//! and [`audit::audit`].

pub mod audit;
pub mod config;
pub mod error;
pub mod runs;
pub mod table;

pub use config::{Experiment, ExperimentConfig, Settings};
pub use error::{CliError, Result};
pub use runs::{run, RunOutput};
pub use table::ResultTable;
