use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use qkbench::config::RunConfig;
use qkbench::runner::{self, RunOptions};
use qkernel::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "qkbench", version, about = "Benchmark quantum and classical SVM kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed; overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Gram matrices and gradients (default: all cores).
    #[arg(long, env = "QKBENCH_THREADS")]
    threads: Option<usize>,
    /// Summary printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every configured kernel and write the comparison report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Reuse search trials already logged in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Initial vs trained accuracy with s = 1 and with the tuned s.
    AblateScaling {
        #[command(flatten)]
        common: Common,
    },
    /// Accuracy as qubits are added to each quantum kernel.
    QubitSweep {
        #[command(flatten)]
        common: Common,
        /// Extra qubit counts; overrides `sweep.extras`.
        #[arg(long, value_delimiter = ',')]
        extras: Option<Vec<usize>>,
    },
    /// RBF-SVC test accuracy against training-set size.
    LearningCurve {
        #[command(flatten)]
        common: Common,
    },
    /// Cumulative explained variance of the training data.
    PcaAnalyze {
        #[command(flatten)]
        common: Common,
    },
    /// Parse and validate a configuration without running it.
    ValidateConfig {
        #[arg(long, short)]
        config: PathBuf,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.apply_seed(seed);
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn emit<T: serde::Serialize>(format: Format, value: &T, csv: impl FnOnce() -> String) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Format::Csv => print!("{}", csv()),
    }
    Ok(())
}

fn read(path: PathBuf) -> impl FnOnce() -> String {
    move || std::fs::read_to_string(path).unwrap_or_default()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, resume } => {
            let (cfg, out) = load(&common)?;
            let outcome = runner::run(&cfg, &RunOptions { out_dir: out, resume })?;
            emit(common.format, &outcome.report, || runner::results_csv(&outcome.report))?;
            if let Some((name, e)) = outcome.failures.into_iter().next() {
                error!("kernel {name} failed");
                return Err(e);
            }
        }
        Command::AblateScaling { common } => {
            let (cfg, out) = load(&common)?;
            let report = runner::ablate_scaling(&cfg)?;
            runner::write_ablation(&report, &out)?;
            emit(common.format, &report, read(out.join("ablation.csv")))?;
        }
        Command::QubitSweep { common, extras } => {
            let (cfg, out) = load(&common)?;
            let extras = extras
                .or_else(|| cfg.sweep.as_ref().map(|s| s.extras.clone()))
                .unwrap_or_else(|| vec![0, 1, 2]);
            let report = runner::qubit_sweep(&cfg, &extras)?;
            runner::write_sweep(&report, &out)?;
            emit(common.format, &report, read(out.join("sweep.csv")))?;
        }
        Command::LearningCurve { common } => {
            let (cfg, out) = load(&common)?;
            let points = runner::run_learning_curve(&cfg)?;
            runner::write_learning_curve(&points, &out)?;
            emit(common.format, &points, read(out.join("learning_curve.csv")))?;
        }
        Command::PcaAnalyze { common } => {
            let (cfg, out) = load(&common)?;
            let analysis = runner::pca_analyze(&cfg)?;
            runner::write_pca(&analysis, &out)?;
            emit(common.format, &analysis, read(out.join("pca.csv")))?;
        }
        Command::ValidateConfig { config } => {
            let cfg = RunConfig::load(&config)?;
            println!("{}: ok ({} kernels)", config.display(), cfg.kernels.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
