use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use moyal_heat_cli::{init_threads, run, Config, Subcommand, EXIT_INFRA};

/// Verification suites and Fujita sweeps for the heat equation on the Moyal plane.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// Flat TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match go(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INFRA as u8)
        }
    }
}

fn go(cli: &Cli) -> anyhow::Result<i32> {
    init_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    cfg.output_dir = out.display().to_string();
    let outcome = run(cli.command, &cfg, &out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("manifest: {}", outcome.manifest_path.display());
    Ok(outcome.status.exit_code())
}
