//! The `xdqn` command line: `train`, `evaluate`, `explain` and
//! `genscenario`, each writing into a run directory indexed by
//! `manifest.json`.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod commands;
pub mod run_dir;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_evaluate, cmd_explain, cmd_genscenario, cmd_train, load_config};
pub use run_dir::{EnvRecord, RunManifest};

use crate::env::Congestion;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "xdqn", version, about = "Deep Q-learning with a boosted-tree mimic target")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a Q-network and its mimic, writing a new run directory.
    Train(TrainArgs),
    /// Play exploitation episodes with a stored policy.
    Evaluate(EvaluateArgs),
    /// Write explanation reports from the stored mimic models.
    Explain(ExplainArgs),
    /// Generate a random DCB-lite scenario file.
    Genscenario(GenArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Scenario file, or `oracle` for a seeded 16-state, 3-action tabular MDP.
    #[arg(long)]
    pub scenario: String,
    /// TOML overrides applied on top of the environment's preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory; must not exist or be empty.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Qnet,
    Mimic,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyKind::Qnet)]
    pub policy: PolicyKind,
    #[arg(long, default_value_t = 20)]
    pub episodes: u64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Defaults to the training seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainMode {
    Local,
    Global,
    Evolution,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ExplainMode,
    /// `a1,a2` for local explanations.
    #[arg(long, default_value = "0,1", value_parser = parse_pair)]
    pub action_pair: (usize, usize),
    /// Reference action for global reports; the explained action for
    /// evolution reports.
    #[arg(long, default_value_t = 0)]
    pub reference_action: usize,
    #[arg(long, default_value_t = crate::explain::DEFAULT_TOP_N)]
    pub top_n: usize,
    #[arg(long, default_value_t = crate::explain::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Greedy mimic episodes whose visited states are explained.
    #[arg(long, default_value_t = 5)]
    pub episodes: u64,
    /// Local reports written.
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
    /// Defaults to the training seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 50)]
    pub flights: usize,
    #[arg(long, default_value_t = 6)]
    pub sectors: usize,
    /// none, low, medium or high.
    #[arg(long, default_value = "medium")]
    pub congestion: Congestion,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected a1,a2 but got '{s}'"))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad action '{x}': {e}"))
    };
    Ok((parse(a)?, parse(b)?))
}

pub fn dispatch(cli: Cli) -> crate::Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Explain(a) => cmd_explain(&a),
        Command::Genscenario(a) => cmd_genscenario(&a),
    }
}

/// Parses `args` (program name first), runs the command and maps the outcome
/// to an exit code, reporting errors on stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
