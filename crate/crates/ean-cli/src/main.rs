mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use ean::error::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ean", version, about = "Search engine for sparse attention-module connection schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat JSON config file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory for artifacts; defaults to runs/<command>-<millis>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the weight-sharing supernet and checkpoint it.
    Pretrain {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the policy-gradient connection-scheme search.
    Search {
        #[command(flatten)]
        common: CommonArgs,
        /// Reward environment: planted, supernet, or external:<endpoint>.
        #[arg(long)]
        env: Option<String>,
    },
    /// Exhaustively rank every scheme on the deterministic objective.
    Bruteforce {
        #[command(flatten)]
        common: CommonArgs,
        /// Use a single stage of m blocks.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        env: Option<String>,
    },
    /// Score baseline scheme generators.
    Baseline {
        #[command(subcommand)]
        kind: BaselineKind,
    },
    /// Measure the relative inference-time increment of a scheme.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Correlate supernet proxy accuracy with from-scratch training.
    Correlate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Answer wire-protocol evaluation requests with supernet proxy accuracy.
    Serve {
        #[command(flatten)]
        common: CommonArgs,
        /// Listen on tcp:HOST:PORT instead of standard streams.
        #[arg(long)]
        endpoint: Option<String>,
    },
}

#[derive(Subcommand)]
enum BaselineKind {
    /// Draw Bernoulli(0.5) schemes and score them.
    Random {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        env: Option<String>,
    },
    /// The periodic heuristic: connect every N-th block.
    Hsp {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        period: Option<usize>,
        #[arg(long)]
        offset: Option<usize>,
    },
}

/// 0 ok, 2 config, 3 transport, 4 numeric failure, 1 otherwise.
fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidConfig(_)
        | Error::Parse { .. }
        | Error::EnumerationBound { .. }
        | Error::Shape { .. } => 2,
        Error::Transport(_) | Error::Protocol { .. } => 3,
        Error::NonFinite { .. } | Error::ZeroVariance => 4,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = commands::dispatch(cli.command) {
        eprintln!("error: {error}");
        std::process::exit(exit_code(&error));
    }
}
