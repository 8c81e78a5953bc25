use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freqdiff::config::RunConfig;
use freqdiff::experiment::Experiment;
use freqdiff::{Error, Result};

/// Frequency-shaped diffusion experiments.
#[derive(Debug, Parser)]
#[command(name = "freqdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed to run; repeat for several. Replaces the config's seed list.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// Output directory, overriding `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sampling stride, overriding `sample.stride`.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    device_threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model per seed; writes checkpoints and loss curves.
    Train,
    /// Draw samples from trained checkpoints.
    Sample,
    /// Score stored samples against the held-out reference split.
    Eval,
    /// Train and score one model per (gamma_l, seed).
    SweepGamma,
    /// Paired baseline/recovery runs over the corruption grid.
    CorruptRecover,
    /// Radial power spectra of the forward process.
    Spectrum,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if !cli.seeds.is_empty() {
        cfg.seeds = cli.seeds.clone();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(stride) = cli.stride {
        cfg.sample.stride = stride;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.device_threads {
        if n == 0 {
            return Err(Error::Config("--device-threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let exp = Experiment::new(load(cli)?)?;
    match cli.command {
        Command::Train => exp.cmd_train(),
        Command::Sample => exp.cmd_sample(),
        Command::Eval => exp.cmd_eval().map(drop),
        Command::SweepGamma => exp.cmd_sweep_gamma().map(drop),
        Command::CorruptRecover => exp.cmd_corrupt_recover().map(drop),
        Command::Spectrum => exp.cmd_spectrum().map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freqdiff: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
