//! Configuration, orchestration and result files for the `sim` command.

pub mod config;
pub mod error;
pub mod output;
pub mod scans;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{RunConfig, ScanKind};
pub use error::{RunError, RunResult};
use output::{input_hash, write_outputs, Summary, SCHEMA_VERSION};
pub use scans::{run_scan, ScanOutput};

/// Directory used when neither the config nor the command line names one.
pub fn default_output_dir(scan: ScanKind) -> PathBuf {
    Path::new("results").join(scan.as_str())
}

/// A finished run.
#[derive(Debug)]
pub struct RunReport {
    pub summary: Summary,
    pub output: ScanOutput,
    pub files: Vec<PathBuf>,
}

/// Runs `scan` on a validated configuration and writes all outputs.
///
/// Grid points are spread over `config.threads` workers (all cores when
/// unset); results are always reduced in grid order, so outputs do not
/// depend on scheduling.
pub fn run(scan: ScanKind, config: &RunConfig) -> RunResult<RunReport> {
    config.validate()?;
    let config = RunConfig {
        scan: Some(scan),
        ..config.clone()
    };
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::Config(format!("cannot start {:?} worker threads: {e}", config.threads)))?;
    let threads = pool.current_num_threads();
    log::info!("{scan}: {threads} worker threads, seed {}", config.seed);
    let output = pool.install(|| run_scan(scan, &config))?;
    let runtime = start.elapsed().as_secs_f64();

    let (pair_text, _) = config.pair_system()?;
    let echo = config.echo();
    let echo_text = echo.to_toml();
    let dir = config.output_dir.clone().unwrap_or_else(|| default_output_dir(scan));
    let mut outputs: Vec<String> = output.tables.iter().map(|t| t.name.clone()).collect();
    outputs.push(output::CONFIG_ECHO_FILE.into());
    outputs.push(output::SUMMARY_FILE.into());
    for w in &output.warnings {
        log::warn!("{w}");
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        scan: scan.as_str().into(),
        seed: config.seed,
        threads,
        input_hash: input_hash(&echo_text, &pair_text),
        runtime_seconds: runtime,
        headline: output.headline.clone(),
        warnings: output.warnings.clone(),
        outputs,
        config: echo,
    };
    let files = write_outputs(&dir, &output.tables, &echo_text, &summary)?;
    Ok(RunReport { summary, output, files })
}
