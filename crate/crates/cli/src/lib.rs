//! Scenario runner behind the `plastlab` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod describe;
pub mod error;
pub mod experiments;
pub mod holder;

use std::path::Path;

pub use config::ScenarioConfig;
pub use error::{CliError, ErrorKind};
pub use experiments::{run_scenario, Outcome};

/// Writes the outcome's files and `summary.json` into `dir`.
pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    for (name, body) in
        outcome.files.iter().chain(std::iter::once(&("summary.json".to_string(), outcome.summary_json())))
    {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn write_error(dir: &Path, err: &CliError) {
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = std::fs::write(dir.join("error.json"), err.to_json() + "\n");
    }
}
