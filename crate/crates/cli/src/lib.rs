//! The `pmx` command line: analysis, refinement, steered execution, rule
//! handling, verification, mutation, timing and the front-end bridge.

pub mod bridge;
mod commands;
mod error;
pub mod stdio;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value as Json;

pub use error::{CliError, CliResult};

/// Output format of a command's report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "pmx", version, about = "Analyse, refine and steer partial state machine models")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Step limit of a run.
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,
    /// Virtual time limit of a run.
    #[arg(long, global = true)]
    pub max_vtime: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

/// Model file and completeness levels shared by most commands.
#[derive(Debug, Clone, clap::Args)]
pub struct ModelArgs {
    /// Model source file.
    pub model: PathBuf,
    /// Completeness levels, e.g. `CTR=partial,UC=absent`; other components
    /// keep their `@level` annotation.
    #[arg(long)]
    pub setting: Option<String>,
}

/// Session options shared by `run` and `serve`.
#[derive(Debug, Clone, clap::Args)]
pub struct SessionArgs {
    /// How decisions are taken: interactive, batch or hybrid. Defaults to
    /// batch when rules are given and interactive otherwise.
    #[arg(long)]
    pub mode: Option<String>,
    /// Rule script answering decisions.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// What happens to a message no transition accepts: stuck or drop.
    #[arg(long, default_value = "stuck")]
    pub policy: String,
    /// Writes every command received, one per line.
    #[arg(long)]
    pub command_log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reports the problematic element sets of every component.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Writes the refined, debuggable model.
    Refine {
        #[command(flatten)]
        model: ModelArgs,
        /// Output file for the refined model; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Output file for the refinement metadata.
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Refines and executes the model, writing the trace as JSON lines.
    Run {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        session: SessionArgs,
        /// Trace file; stdout when absent.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Commands read from this file instead of the terminal.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Writes the default rules of the refined model.
    GenRules {
        #[command(flatten)]
        model: ModelArgs,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Applies a single-choice rule to the model.
    ApplyRule {
        #[command(flatten)]
        model: ModelArgs,
        /// Rule script holding the rule.
        #[arg(long)]
        rules: PathBuf,
        /// Name of the rule to apply.
        #[arg(long)]
        rule: String,
        /// Component a `*.state` where clause refers to.
        #[arg(long)]
        component: Option<String>,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Checks the refined model by bounded exploration.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        /// simulation, reach, progress, cross or all.
        #[arg(long, default_value = "all")]
        check: String,
        /// Longest input sequence explored.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Only this component.
        #[arg(long)]
        component: Option<String>,
        /// Checks progress of the model as given, without refinement.
        #[arg(long)]
        unrefined: bool,
        /// Largest state machine explored.
        #[arg(long)]
        max_states: Option<usize>,
        /// Explores on one thread.
        #[arg(long)]
        sequential: bool,
        /// What happens to a message no transition accepts: stuck or drop.
        #[arg(long, default_value = "stuck")]
        policy: String,
    },
    /// Removes a share of the states and transitions at random.
    Mutate {
        /// Model source file.
        model: PathBuf,
        /// Share of states and transitions removed, 0 to 90.
        #[arg(long)]
        percent: u32,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Times analysis, refinement, rule loading and rule selection on
    /// generated inputs.
    Bench {
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// Rules in the generated script.
        #[arg(long, default_value_t = 10_000)]
        rules: usize,
        /// Lines per generated rule.
        #[arg(long, default_value_t = 100)]
        rule_lines: usize,
        /// States of the generated model.
        #[arg(long, default_value_t = 350)]
        states: usize,
        /// Transitions of the generated model.
        #[arg(long, default_value_t = 620)]
        transitions: usize,
        /// Analyses on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Runs the model with commands from one front-end over TCP.
    Serve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        session: SessionArgs,
        /// Address to listen on.
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
    },
}

/// What a command reports: human text, a structured mirror and whether it
/// succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub json: Json,
    pub ok: bool,
}

impl Report {
    fn ok(text: impl Into<String>, json: Json) -> Self {
        Report {
            text: text.into(),
            json,
            ok: true,
        }
    }
}

/// Runs one parsed command line.
pub fn execute(cli: &Cli) -> CliResult<Report> {
    commands::execute(cli)
}
