//! Report files: `report.json`, CSV tables and the `run_meta.json` sidecar.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::commands::{CommandName, Outcome, Table};
use crate::error::CliError;

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    command: &'static str,
    pass: bool,
    config: &'a Value,
    report: &'a Value,
}

/// Everything that varies between identical runs lives here.
#[derive(Serialize)]
struct RunMeta<'a> {
    schema: &'static str,
    command: &'static str,
    version: &'static str,
    unix_time: u64,
    elapsed_seconds: f64,
    threads: usize,
    config_path: &'a str,
}

fn write_table(dir: &Path, t: &Table) -> Result<(), CliError> {
    let path = dir.join(format!("{}.csv", t.name));
    let field = format!("--out ({})", path.display());
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| CliError::config(field.clone(), e.to_string()))?;
    w.write_record(&t.header)
        .map_err(|e| CliError::config(field.clone(), e.to_string()))?;
    for row in &t.rows {
        w.write_record(row)
            .map_err(|e| CliError::config(field.clone(), e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(field, e))
}

pub fn write(
    dir: &Path,
    cmd: CommandName,
    outcome: &Outcome,
    elapsed_seconds: f64,
    config_path: &str,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io("--out", e))?;
    let report = Report {
        schema: spectral_bm_core::REPORT_SCHEMA,
        command: cmd.as_str(),
        pass: outcome.pass,
        config: &outcome.config,
        report: &outcome.report,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fs::write(dir.join("report.json"), text).map_err(|e| CliError::io("--out", e))?;
    for t in &outcome.tables {
        write_table(dir, t)?;
    }
    let meta = RunMeta {
        schema: spectral_bm_core::REPORT_SCHEMA,
        command: cmd.as_str(),
        version: env!("CARGO_PKG_VERSION"),
        unix_time: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        elapsed_seconds,
        threads: rayon::current_num_threads(),
        config_path,
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    text.push('\n');
    fs::write(dir.join("run_meta.json"), text).map_err(|e| CliError::io("--out", e))
}
