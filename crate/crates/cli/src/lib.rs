//! `glycemic` command-line harness.
//!
//! Settings are layered: built-in defaults, then the TOML file given with
//! `--config`, then `GLYCEMIC_*` environment variables, then flags.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod failure;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use glycemic_core::env::ControllerMode;
use glycemic_core::par::Execution;
use serde_json::Value;

use crate::config::{ControllerEntry, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "glycemic", version, about = "Simulate, tune, train and compare closed-loop insulin controllers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trajectory and metrics.
    Simulate,
    /// Train a TD3 agent (direct or adaptive-fuzzy mode).
    Train,
    /// Search static fuzzy consequents.
    TuneStatic,
    /// Evaluate one controller over randomized and extreme meal days.
    Evaluate,
    /// Run several controllers over the same grid.
    Compare {
        /// `[NAME=]MODE:PATH`; repeat for each controller.
        #[arg(long = "controller", value_name = "SPEC")]
        controllers: Vec<String>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<ControllerMode, String> {
    s.parse().map_err(|e: glycemic_core::Error| e.to_string())
}

fn parse_execution(s: &str) -> std::result::Result<Execution, String> {
    match s {
        "sequential" => Ok(Execution::Sequential),
        "parallel" => Ok(Execution::Parallel),
        other => Err(format!("unknown execution `{other}` (sequential | parallel)")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, global = true, env = "GLYCEMIC_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "GLYCEMIC_SEED", value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "GLYCEMIC_EPISODES", value_name = "N")]
    pub episodes: Option<u64>,
    /// direct | adaptive-fuzzy | static-fuzzy
    #[arg(long, global = true, env = "GLYCEMIC_MODE", value_name = "NAME", value_parser = parse_mode)]
    pub mode: Option<ControllerMode>,
    /// nominal | random | extreme | path to a scenario file
    #[arg(long, global = true, env = "GLYCEMIC_SCENARIO", value_name = "PATH|NAME")]
    pub scenario: Option<String>,
    #[arg(long, global = true, env = "GLYCEMIC_CHECKPOINT", value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, global = true, env = "GLYCEMIC_FUZZY_PARAMS", value_name = "PATH")]
    pub fuzzy_params: Option<PathBuf>,
    #[arg(long, global = true, env = "GLYCEMIC_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// sequential | parallel (evaluation sweeps only; results are identical)
    #[arg(long, global = true, env = "GLYCEMIC_EXECUTION", value_name = "NAME", value_parser = parse_execution)]
    pub execution: Option<Execution>,
}

/// Effective configuration for `cli`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let controllers = match &cli.command {
        Command::Compare { controllers } => controllers
            .iter()
            .map(|s| ControllerEntry::parse_flag(s))
            .collect::<Result<Vec<_>>>()?,
        _ => Vec::new(),
    };
    let c = cli.common.clone();
    cfg.apply(Overrides {
        seed: c.seed,
        episodes: c.episodes,
        mode: c.mode,
        scenario: c.scenario,
        checkpoint: c.checkpoint,
        fuzzy_params: c.fuzzy_params,
        out: c.out,
        execution: c.execution,
        controllers,
    });
    Ok(cfg)
}

/// Runs the selected command and returns its summary.
pub fn run(cli: &Cli) -> Result<Value> {
    let cfg = resolve_config(cli)?;
    match cli.command {
        Command::Simulate => commands::simulate(cfg),
        Command::Train => commands::train(cfg),
        Command::TuneStatic => commands::tune(cfg),
        Command::Evaluate => commands::evaluate(cfg),
        Command::Compare { .. } => commands::compare(cfg),
    }
}
