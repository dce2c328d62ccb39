//! Command-line harness around `btmle-core`: CSV datasets with JSON
//! schemas, single fits, case-study reproduction, resumable coverage sweeps
//! and plot-ready reports.

use std::path::Path;

use serde::Serialize;

pub mod case_study;
pub mod commands;
pub mod config;
pub mod coverage;
pub mod error;
pub mod estimate;
pub mod report;
pub mod schema;
pub mod sweep;

pub use error::{CliError, CliResult};

/// Write `value` as pretty-printed JSON followed by a newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::json(path))?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}
