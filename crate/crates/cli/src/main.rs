//! `fewshot`: build, verify, prompt, score, compare and design few-shot
//! text-classification benchmarks.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fewshot_bench::corpus::Phase;
use fewshot_bench::stats::ProtocolTag;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "fewshot",
    version,
    about = "Few-shot text classification benchmark toolkit"
)]
struct Cli {
    /// JSON run configuration (paths, sampling, stats, designer, remote).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Human-readable errors and indented standard output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a dataset directory and summarize it.
    Ingest {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Sample episodes and write a checksummed manifest.
    Build(BuildArgs),
    /// Re-derive every episode of a manifest from the datasets.
    Verify {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Dump multiple-choice prompts for offline inference.
    Prompts {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave out the training prompts.
        #[arg(long)]
        test_only: bool,
    },
    /// Produce a prediction file with a reference or remote predictor.
    Predict(PredictArgs),
    /// Score predictions against a manifest.
    Score {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired comparison of two score reports over the same manifest.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the budget grid and recommend a benchmark size.
    Design {
        /// Simulated runs per configuration.
        #[arg(long)]
        runs: Option<u32>,
        /// Where to write the per-configuration CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Where to write the recommendation JSON (standard output if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<u32>,
    #[arg(long, value_enum)]
    phase: Option<PhaseArg>,
    /// Alternate few-shot and zero-shot views instead of pairing them.
    #[arg(long)]
    unpaired: bool,
    /// Emit few-shot views only.
    #[arg(long)]
    no_zero_shot: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum PhaseArg {
    MetaTrain,
    MetaVal,
    MetaTest,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::MetaTrain => Phase::MetaTrain,
            PhaseArg::MetaVal => Phase::MetaVal,
            PhaseArg::MetaTest => Phase::MetaTest,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PredictorArg {
    Random,
    Majority,
    Oracle,
    Remote,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TagArg {
    PretrainingOnly,
    MetaTrained,
}

impl From<TagArg> for ProtocolTag {
    fn from(t: TagArg) -> Self {
        match t {
            TagArg::PretrainingOnly => ProtocolTag::PretrainingOnly,
            TagArg::MetaTrained => ProtocolTag::MetaTrained,
        }
    }
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    predictor: PredictorArg,
    #[arg(long, value_enum, default_value = "pretraining-only")]
    protocol_tag: TagArg,
    /// Base URL of the inference service.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    retries: Option<u32>,
    /// Batches in flight at once.
    #[arg(long)]
    concurrency: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::read(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.reseed(seed);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
        config.remote.concurrency = config.remote.concurrency.min(n);
    }
    let ctx = commands::Context {
        config,
        seed: cli.seed.unwrap_or(0),
        pretty: cli.pretty,
        argv: std::env::args().collect(),
    };
    match cli.command {
        Command::Ingest { data } => commands::ingest(&ctx, data),
        Command::Build(args) => commands::build(&ctx, args),
        Command::Verify { manifest, data } => commands::verify(&ctx, manifest, data),
        Command::Prompts {
            manifest,
            data,
            out,
            test_only,
        } => commands::prompts(&ctx, manifest, data, out, test_only),
        Command::Predict(args) => commands::predict(&ctx, args),
        Command::Score {
            manifest,
            data,
            predictions,
            out,
        } => commands::score(&ctx, manifest, data, predictions, out),
        Command::Compare { a, b, out } => commands::compare(&ctx, &a, &b, out),
        Command::Design { runs, csv, out } => commands::design(&ctx, runs, csv, out),
    }
}

fn main() -> ExitCode {
    let pretty = std::env::args().any(|a| a == "--pretty");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) if pretty => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let message = e.kind().to_string();
            let detail = e.render().to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or(&message)
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_owned()).to_json_line());
            return ExitCode::from(2);
        }
    };
    let pretty = cli.pretty;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if pretty {
                eprintln!("error ({}): {e}", e.kind());
            } else {
                eprintln!("{}", e.to_json_line());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
