//! `pcnsim`: operator CLI and `jcnsra/1` server.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pcnsim", version, about = "Payment-channel allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Snapshot source and environment settings shared by several subcommands.
/// Flags override values read from `--config`.
#[derive(Args, Clone, Debug)]
pub struct EnvArgs {
    /// Snapshot document; a synthetic graph is generated when absent.
    #[arg(long, alias = "base")]
    pub snapshot: Option<PathBuf>,
    /// Node count of the generated graph when no snapshot is given.
    #[arg(long, default_value_t = 2000)]
    pub graph_nodes: usize,
    /// Seed of the generated graph when no snapshot is given.
    #[arg(long, default_value_t = 0)]
    pub graph_seed: u64,
    /// Environment config file (JSON, keys as in `EnvConfig`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sampled graph size.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Channels per episode (episode length).
    #[arg(long)]
    pub channels: Option<usize>,
    /// Allocation buckets [default: 10].
    #[arg(long)]
    pub k: Option<u32>,
    /// Total budget in msat [default: 10000000000].
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub provider_bias: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic snapshot.
    Synth(commands::SynthArgs),
    /// Draw one forest-fire sample and print it as a snapshot document.
    Sample(commands::SampleArgs),
    /// Evaluate a policy over many sampled episodes.
    Eval(commands::EvalArgs),
    /// Serve environments over jcnsra/1.
    Serve(commands::ServeArgs),
    /// Grow the snapshot with deployed agents and compare centralities.
    Analyze(commands::AnalyzeArgs),
    /// Record or verify a protocol transcript.
    Replay(commands::ReplayArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Sample(a) => commands::sample(a),
        Command::Eval(a) => commands::eval(a),
        Command::Serve(a) => commands::serve(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Replay(a) => commands::replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcnsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
