//! Command-line front end for `garch-omnibus`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{
    cmd_acf, cmd_fit, cmd_mc, cmd_simulate, cmd_test, ReportRow, TestOptions, TestReport,
};
pub use config::Settings;
pub use error::{CliError, Result};
pub use io::{load_series, parse_series, Column, ReturnSeries, Transform};
