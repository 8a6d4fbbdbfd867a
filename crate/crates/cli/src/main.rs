//! `bgtc` drives the behaviour-selection experiment pipeline stage by stage
//! or end to end. Exit codes: 0 on success, 2 on configuration errors, 3 on
//! pipeline errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bgtc_core::harness::{
    self, conditions, neuro_pairs, report, with_pool, Config, Layout, PipelineError,
};

#[derive(Parser)]
#[command(
    name = "bgtc",
    about = "Spiking basal-ganglia behaviour selection experiments",
    version
)]
struct Cli {
    /// Config file (line-oriented `section.key = value`, `schema = 1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed; every random stream derives from it.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (0 = all logical cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the session corpus and prediction streams.
    Synth,
    /// Run the spiking circuit for every neuro condition.
    Circuit,
    /// Bin spike records into firing-rate matrices.
    Rates,
    /// Train the decoder with cross-subject folds.
    TrainDecoder,
    /// Produce per-session decision streams for every condition.
    Decide,
    /// Run the robot batteries over the decision streams.
    Robot,
    /// Aggregate fragments from all seeds into the report.
    Report,
    /// Run every stage in order, then refresh the report.
    All,
}

fn load_config(cli: &Cli) -> Result<Config, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    if cli.workers != 0 {
        cfg.workers = cli.workers;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    let layout = Layout::new(&cli.out, cli.seed);
    let pairs = neuro_pairs(&cfg);
    let conds = conditions(&cfg);
    match cli.command {
        Command::Synth => with_pool(cfg.workers, || harness::stage_synth(&cfg, &layout)),
        Command::Circuit => {
            with_pool(cfg.workers, || harness::stage_circuit(&cfg, &layout, &pairs))
        }
        Command::Rates => with_pool(cfg.workers, || harness::stage_rates(&cfg, &layout, &pairs)),
        Command::TrainDecoder => {
            with_pool(cfg.workers, || harness::stage_train(&cfg, &layout, &pairs))
        }
        Command::Decide => with_pool(cfg.workers, || harness::stage_decide(&cfg, &layout, &conds)),
        Command::Robot => with_pool(cfg.workers, || harness::stage_robot(&cfg, &layout, &conds)),
        Command::Report => {
            harness::write_effective_config(&cfg, &cli.out)?;
            report::stage_report(&cfg, &cli.out).map(|_| ())
        }
        Command::All => harness::run_all(&cfg, &cli.out, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(PipelineError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("pipeline error: {e}");
            ExitCode::from(3)
        }
    }
}
