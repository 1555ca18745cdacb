//! Batch front-end: config parsing, suite orchestration and result files.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::Path;

use clap::ValueEnum;

pub use commands::{RunOutcome, Status};
pub use config::Config;

/// Exit code for I/O, configuration and other infrastructure failures.
pub const EXIT_INFRA: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    VerifyDoi,
    HeatCheck,
    JensenCheck,
    FujitaSweep,
    Certify,
}

/// Runs one subcommand, writing its outputs and manifest under `out`.
pub fn run(cmd: Subcommand, cfg: &Config, out: &Path) -> anyhow::Result<RunOutcome> {
    std::fs::create_dir_all(out)?;
    match cmd {
        Subcommand::VerifyDoi => commands::verify_doi(cfg, out),
        Subcommand::HeatCheck => commands::heat_check(cfg, out),
        Subcommand::JensenCheck => commands::jensen_check(cfg, out),
        Subcommand::FujitaSweep => commands::fujita_sweep_cmd(cfg, out),
        Subcommand::Certify => commands::certify(cfg, out),
    }
}

/// Sizes the global worker pool from NC_HEAT_THREADS (unset or 0: all cores).
pub fn init_threads() -> anyhow::Result<()> {
    let n = match std::env::var("NC_HEAT_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| anyhow::anyhow!("NC_HEAT_THREADS={v} is not a count"))?,
        Err(_) => 0,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
