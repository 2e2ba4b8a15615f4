use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cqed_fano::cli::{execute, CliError, Command, RunConfig, RunOptions};

/// Emitter–cavity Fano interference: rates, dynamics and spectra.
#[derive(Debug, Parser)]
#[command(name = "cqed-fano", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted. Nothing is written on failure.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for `validate`; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integrate `dynamics` with fixed-step RK4 for bit-reproducible output.
    #[arg(long, global = true)]
    fixed_step: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Transition rate W over a detuning sweep.
    RateSweep,
    /// Populations from the equations of motion and the coarse-grained solution.
    Dynamics,
    /// Filtered emission spectrum and its components.
    Spectrum,
    /// Total spectrum over a grid of emitter–cavity detunings.
    SpectrumMap,
    /// Seeded invariant checks.
    Validate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::RateSweep => Command::RateSweep,
            Sub::Dynamics => Command::Dynamics,
            Sub::Spectrum => Command::Spectrum,
            Sub::SpectrumMap => Command::SpectrumMap,
            Sub::Validate => Command::Validate,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = load(cli)?;
    let cmd = cli
        .command
        .map(Command::from)
        .or(cfg.command)
        .ok_or_else(|| CliError::Config("no command given on the command line or in the config".into()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let opts = RunOptions { fixed_step: cli.fixed_step };
    pool.install(|| execute(cmd, &cfg, opts))
}

fn write_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(CliError::from),
        None => write_stdout(&text),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let CliError::Validation { report, .. } = &e {
                let _ = write_stdout(report);
            }
            eprintln!("cqed-fano: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
