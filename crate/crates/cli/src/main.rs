use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ptscrc_cli::config::ExperimentConfig;
use ptscrc_cli::error::{CliError, CliResult};
use ptscrc_cli::pipelines::{self, Context, Figure};
use ptscrc_cli::{resolve_out_dir, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "ptscrc", version, about = "Calibrated set prediction and robust power control experiments")]
struct Cli {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset.
    Generate,
    /// Calibrate a set predictor and write its spec.
    Calibrate,
    /// Measure risk, coverage and inefficiency on test series.
    Evaluate,
    /// Open-loop power control under an interference budget.
    MpcPower,
    /// Closed-loop retransmission power control.
    MpcHarq,
    /// Plot-ready data for one of the standard figures.
    ReproduceFigure {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Aggregate episode CSVs of a run directory.
    Summarize { dir: PathBuf },
}

fn load(cli: &Cli, required: bool) -> CliResult<(ExperimentConfig, PathBuf)> {
    let (mut config, base) = match &cli.config {
        Some(path) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (ExperimentConfig::load(path)?, base)
        }
        None if required => return Err(CliError::Config("--config is required for this subcommand".into())),
        None => (ExperimentConfig::from_toml("")?, PathBuf::new()),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok((config, base))
}

fn run(cli: &Cli) -> CliResult<()> {
    let summarize_dir = match &cli.command {
        Command::Summarize { dir } => Some(dir),
        _ => None,
    };
    let (config, base) = load(cli, summarize_dir.is_none())?;
    let env = std::env::var(OUT_DIR_ENV).ok();
    let out = match (summarize_dir, &cli.out) {
        (Some(dir), None) => dir.join("summary"),
        _ => resolve_out_dir(cli.out.as_deref(), &config, env.as_deref()),
    };
    let ctx = Context { config, base, out };
    match &cli.command {
        Command::Generate => pipelines::generate(&ctx),
        Command::Calibrate => pipelines::calibrate(&ctx),
        Command::Evaluate => pipelines::evaluate(&ctx),
        Command::MpcPower => pipelines::mpc_power(&ctx),
        Command::MpcHarq => pipelines::mpc_harq(&ctx),
        Command::ReproduceFigure { figure } => pipelines::reproduce_figure(&ctx, *figure),
        Command::Summarize { dir } => pipelines::summarize(&ctx, dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::Config(format!("--workers: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
