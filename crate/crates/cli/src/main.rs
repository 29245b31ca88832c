use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bonescan::{Algorithm, ExecMode};
use bonescan_cli::corpus::{CorpusSpec, Generator, Precision};
use bonescan_cli::report::BarrierWeights;
use bonescan_cli::{
    cmd_bench, cmd_generate, cmd_skin, cmd_verify, parse_algorithms, BenchOpts, CliError,
    GenerateOpts, Outcome, ReportFormat, SkinOpts, VerifyOpts,
};

#[derive(Parser)]
#[command(
    name = "bonescan",
    version,
    about = "Parallel skeleton pose scans with a verifiable cost model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExecArg {
    Sequential,
    ReverseSequential,
    Parallel,
}

impl From<ExecArg> for ExecMode {
    fn from(arg: ExecArg) -> ExecMode {
        match arg {
            ExecArg::Sequential => ExecMode::Sequential,
            ExecArg::ReverseSequential => ExecMode::ReverseSequential,
            ExecArg::Parallel => ExecMode::Parallel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded skeleton/clip corpus to a directory.
    Generate {
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Generator::RandomTree)]
        generator: Generator,
        /// Joints per skeleton.
        #[arg(long, default_value_t = 300)]
        joints: usize,
        /// Exact maximum depth of every skeleton; defaults to joints - 1 for
        /// chains and 60 (capped at joints - 1) otherwise.
        #[arg(long)]
        depth: Option<usize>,
        /// Number of skeleton/clip pairs.
        #[arg(long, default_value_t = 100)]
        skeletons: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Precision::Double)]
        precision: Precision,
    },
    /// Re-run every algorithm over a corpus and compare against the oracle.
    Verify {
        /// Corpus directory produced by `generate`.
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated algorithm names, or "all" for the five parallel
        /// ones.
        #[arg(long, default_value = "all")]
        algorithms: String,
        #[arg(long, default_value_t = 64)]
        block_size: usize,
        /// Sample times per clip, spread evenly over its duration.
        #[arg(long, default_value_t = 16)]
        times: usize,
        /// Override the precision recorded in the corpus manifest.
        #[arg(long, value_enum)]
        precision: Option<Precision>,
    },
    /// Produce a cost report, sweeping depths or re-scanning a corpus.
    Bench {
        /// Benchmark an existing corpus instead of generated sweeps.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Depths to sweep when no corpus is given.
        #[arg(long, value_delimiter = ',', default_value = "15,30,60,120")]
        depths: Vec<usize>,
        /// Joints per skeleton (chains use depth + 1 instead).
        #[arg(long, default_value_t = 300)]
        joints: usize,
        /// Skeletons per depth, concatenated into one forest.
        #[arg(long, default_value_t = 100)]
        characters: usize,
        #[arg(long, value_enum, default_value_t = Generator::RandomTree)]
        generator: Generator,
        #[arg(long, default_value = "all")]
        algorithms: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        block_size: usize,
        /// Barrier weights as "global,group" multiples of one composition.
        #[arg(long, default_value = "4,1")]
        barrier_weights: String,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the oracle comparison (rows then report verified=false).
        #[arg(long)]
        allow_unverified: bool,
        #[arg(long, value_enum)]
        precision: Option<Precision>,
        /// Simulated execution order; results must not depend on it.
        #[arg(long, value_enum, default_value_t = ExecArg::Sequential)]
        exec: ExecArg,
    },
    /// Emit skin matrices for every skeleton in a corpus at one sample time.
    Skin {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "compressed")]
        algorithm: String,
        /// Sample time in seconds.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        block_size: usize,
        #[arg(long, value_enum)]
        precision: Option<Precision>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Generate {
            out,
            generator,
            joints,
            depth,
            skeletons,
            seed,
            precision,
        } => {
            let target_depth = depth.unwrap_or(match generator {
                Generator::Chain => joints.saturating_sub(1),
                _ => 60.min(joints.saturating_sub(1)),
            });
            cmd_generate(&GenerateOpts {
                out,
                spec: CorpusSpec {
                    generator,
                    joints_per_skeleton: joints,
                    target_depth,
                    skeleton_count: skeletons,
                    seed,
                    precision,
                },
            })
        }
        Command::Verify {
            corpus,
            algorithms,
            block_size,
            times,
            precision,
        } => cmd_verify(&VerifyOpts {
            corpus,
            algorithms: parse_algorithms(&algorithms)?,
            block_size,
            times,
            precision,
        }),
        Command::Bench {
            corpus,
            depths,
            joints,
            characters,
            generator,
            algorithms,
            seed,
            block_size,
            barrier_weights,
            format,
            out,
            allow_unverified,
            precision,
            exec,
        } => cmd_bench(&BenchOpts {
            corpus,
            depths,
            joints,
            characters,
            generator,
            algorithms: parse_algorithms(&algorithms)?,
            seed,
            block_size,
            weights: BarrierWeights::parse(&barrier_weights).map_err(CliError::Spec)?,
            format: match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Json => ReportFormat::Json,
            },
            out,
            allow_unverified,
            precision,
            exec: exec.into(),
        }),
        Command::Skin {
            corpus,
            algorithm,
            time,
            out,
            block_size,
            precision,
        } => cmd_skin(&SkinOpts {
            corpus,
            algorithm: algorithm
                .parse::<Algorithm>()
                .map_err(|e| CliError::Spec(e.to_string()))?,
            time,
            out,
            block_size,
            precision,
        }),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
