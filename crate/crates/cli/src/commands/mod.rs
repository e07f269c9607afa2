//! Subcommand implementations.

mod behavior;
mod classify;
mod ingest;
mod nilm;
mod report;
mod signatures;
mod windows;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::RunConfig;
use crate::{Cli, Command};

pub struct Globals {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub config: RunConfig,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;
    let globals = Globals {
        seed: cli.seed,
        out_dir: cli.out,
        config,
    };
    match cli.command {
        Command::Ingest { source } => ingest::run(&globals, source),
        Command::Windows(args) => windows::run(&globals, args),
        Command::Nilm { action } => nilm::run(&globals, action),
        Command::Site { action } => nilm::run_site(&globals, action),
        Command::Signatures { action } => signatures::run(&globals, action),
        Command::Classify { action } => classify::run(&globals, action),
        Command::Behavior(args) => behavior::run(&globals, args),
        Command::Report(args) => report::run(&globals, args),
    }
}

/// Input paths must exist before a stage starts.
pub fn require_exists(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

/// Appends a suffix to a full file name ("model.ckpt" -> "model.ckpt<suffix>").
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}
