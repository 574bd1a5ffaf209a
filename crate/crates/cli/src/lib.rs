//! Command-line front end: CSV ingestion, run configuration, reports.

pub mod app;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;

pub use app::run;
pub use error::{CliError, CliResult};
