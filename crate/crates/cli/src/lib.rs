//! Config-driven front end for the spectral-bm harnesses.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;
use std::time::Instant;

pub use commands::{CommandName, Outcome};
pub use error::CliError;

/// Exit status of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
        }
    }
}

/// Reads the config, runs `cmd` and writes the report files into `out`.
pub fn execute(
    cmd: CommandName,
    config: &Path,
    out: &Path,
    seed: Option<u64>,
) -> Result<Status, CliError> {
    let text = std::fs::read_to_string(config).map_err(|e| CliError::io("--config", e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config("--config", e.to_string()))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let t0 = Instant::now();
    let outcome = commands::run(cmd, value, base, seed)?;
    output::write(
        out,
        cmd,
        &outcome,
        t0.elapsed().as_secs_f64(),
        &config.display().to_string(),
    )?;
    Ok(if outcome.pass {
        Status::Pass
    } else {
        Status::Fail
    })
}
