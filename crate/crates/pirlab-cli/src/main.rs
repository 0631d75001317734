//! `pirlab` command-line front end.

mod commands;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "pirlab", version, about = "PIR schemes over graph-replicated storage")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Structural,
    Distributional,
    Statistical,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity bounds for complete graphs.
    Bounds {
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construction sequences x, y, z with the scale M, L and rate.
    Sequences {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deterministic scheme over K_n for the file stored by servers u and v.
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "1,2")]
        theta: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the full verification and fail on any violation.
        #[arg(long)]
        verify: bool,
    },
    /// Independence check, recovery patterns, side information and SRP.
    Extract {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subpacketization-1 probabilistic scheme from a deterministic one.
    Transform {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Universal probabilistic scheme on any graph.
    General {
        /// complete:N, bipartite:M,N, star:L, cycle:N, path:N, paw (suffix xR
        /// for the R-multigraph extension) or a graph JSON file.
        #[arg(long)]
        graph: String,
        #[arg(long, default_value_t = 2)]
        q: u64,
        /// File id or u,v[,k].
        #[arg(long, default_value = "0")]
        theta: String,
        /// Exact per-server query distributions by enumeration.
        #[arg(long)]
        enumerate: bool,
        /// Simulated retrievals with random contents.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// End-to-end retrieval with random contents.
    Simulate {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value = "random")]
        contents: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Probabilistic schemes: weigh every row instead of sampling.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Privacy audit over every desired file.
    Audit {
        /// kN: schemes built over K_N (structural, distributional after
        /// transformation, or statistical).
        #[arg(long, conflicts_with = "graph")]
        family: Option<String>,
        /// Universal scheme on this graph (distributional or statistical).
        #[arg(long)]
        graph: Option<String>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 2)]
        q: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { pirlab::Exec::Sequential } else { pirlab::Exec::Parallel };
    match commands::run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pirlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
