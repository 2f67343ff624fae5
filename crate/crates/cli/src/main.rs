//! `mdiff`: command-line harness for ergodicity analysis and the diffusion
//! and training experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mdiff", version, about = "Diffusion of context and credit in Markovian models")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent trials.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file; stdout when omitted. Metadata goes to `<out>.meta.json`
    /// (or stderr when writing to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coefficients, graph structure and stationary behaviour of a matrix.
    Analyze {
        /// Matrix JSON file.
        matrix: PathBuf,
        /// Rescale rows that do not sum to one.
        #[arg(long)]
        normalize: bool,
        /// Entries above this value count as edges.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// Horizon for the geometric-rate fit.
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        max_t: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Canonical block decomposition of a matrix or graph.
    Decompose {
        /// Matrix JSON file, or graph JSON with --graph.
        input: PathBuf,
        #[arg(long)]
        graph: bool,
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Dobrushin coefficient of growing non-homogeneous products.
    Diffuse {
        #[arg(long, default_value = "full")]
        topology: String,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        states: u64,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Number of seeds, derived from --seed.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        /// Power one random matrix instead of drawing a new one per step.
        #[arg(long)]
        homogeneous: bool,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Row spreads of running products of random positive matrices.
    Rowsnap {
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        states: u64,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Span-controlled training experiment.
    Train {
        /// Comma-separated spans.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 3.3, 10.0, 33.0, 100.0, 333.0, 1000.0])]
        spans: Vec<f64>,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        sequences: u64,
        /// Learner topology: `sparse[:density:multiplier]` or `full`.
        #[arg(long, default_value = "sparse")]
        topology: String,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        max_epochs: u64,
        #[arg(long, default_value_t = 1e-5)]
        rel_tol: f64,
        /// Relative likelihood slack for counting a trial as converged.
        #[arg(long, default_value_t = 0.005)]
        slack: f64,
        /// Existing directory receiving training.csv, history.csv and summary.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Sample observation sequences.
    Sample {
        /// Span of the two-branch generator.
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        span: Option<f64>,
        /// HMM JSON file.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        count: u64,
        /// Maximum sequence length (generator default: 50 * span + 20;
        /// model default: 100).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        cap: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Credit-diffusion trace of a model on observation sequences.
    Credit {
        /// HMM JSON file.
        #[arg(long)]
        model: PathBuf,
        /// Sequence file.
        #[arg(long)]
        sequences: PathBuf,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
