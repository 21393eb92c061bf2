use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use forster_sim::config::TEMPLATE;
use forster_sim::{run, RunConfig, RunError, ScanKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Starkmap,
    GainScan,
    FidelityScan,
    Retrieval,
    OracleCheck,
    /// Print a commented default configuration.
    Template,
}

/// Förster-resonant Rydberg transistor scans.
#[derive(Debug, Parser)]
#[command(name = "sim", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one parameter, e.g. `--set stats.source_rate=20`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_pair)]
    set: Vec<(String, String)>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

fn scan_of(command: Command) -> Option<ScanKind> {
    Some(match command {
        Command::Starkmap => ScanKind::Starkmap,
        Command::GainScan => ScanKind::GainScan,
        Command::FidelityScan => ScanKind::FidelityScan,
        Command::Retrieval => ScanKind::Retrieval,
        Command::OracleCheck => ScanKind::OracleCheck,
        Command::Template => return None,
    })
}

fn execute(args: Args) -> Result<(), RunError> {
    let Some(scan) = scan_of(args.command) else {
        print!("{TEMPLATE}");
        return Ok(());
    };
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path, &args.set)?,
        None => RunConfig::from_toml_with("", "defaults", &args.set)?,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = Some(out);
    }
    if let Some(configured) = config.scan.filter(|s| *s != scan) {
        log::warn!("config names scan `{configured}`; running `{scan}` as requested");
    }
    let report = run(scan, &config)?;
    let headline = serde_json::to_string_pretty(&report.summary.headline).unwrap_or_default();
    println!("{headline}");
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
