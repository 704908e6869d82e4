//! Command-line front end: configuration loading, subcommands and table
//! output for the `optrec` solver.

pub mod commands;
pub mod config;
pub mod error;
pub mod series;

pub use commands::{run, Command, Format, Report};
pub use config::{BetaSpec, Overrides, RangeSpec, RunConfig};
pub use error::{exit, CliError};
pub use series::{Cell, SweepSeries};
