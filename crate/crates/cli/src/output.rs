//! Result files and the JSON run summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{RunError, RunResult};
use crate::scans::Table;

/// Bumped on any incompatible change to file names, columns or summary keys.
pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

/// Content hash of the run inputs, in the style of a git blob id but with
/// SHA-256: `sha256("blob <len>\0" ‖ content)`.
pub fn input_hash(config_echo: &str, pair_system: &str) -> String {
    let content = format!("{config_echo}\n# pair system\n{pair_system}");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scan: String,
    pub seed: u64,
    pub threads: usize,
    pub input_hash: String,
    pub runtime_seconds: f64,
    pub headline: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub config: RunConfig,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn table_to_csv(table: &Table) -> RunResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let err = |e: csv::Error| io_error(Path::new(&table.name), e);
    w.write_record(&table.header).map_err(err)?;
    for row in &table.rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner().map_err(|e| io_error(Path::new(&table.name), e))
}

fn write(path: &Path, bytes: &[u8]) -> RunResult<()> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Writes tables, the config echo and the summary into `dir`.
pub fn write_outputs(dir: &Path, tables: &[Table], config_echo: &str, summary: &Summary) -> RunResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    for t in tables {
        let path = dir.join(&t.name);
        write(&path, &table_to_csv(t)?)?;
        written.push(path);
    }
    let echo = dir.join(CONFIG_ECHO_FILE);
    write(&echo, config_echo.as_bytes())?;
    written.push(echo);
    let path = dir.join(SUMMARY_FILE);
    let mut json = serde_json::to_string_pretty(summary).map_err(|e| io_error(&path, e))?;
    json.push('\n');
    write(&path, json.as_bytes())?;
    written.push(path);
    Ok(written)
}
