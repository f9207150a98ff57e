use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rok_cli::{cmd_defaults, cmd_reference, cmd_run, cmd_stability, cmd_sweep, CliError, Registry, RunConfig};

#[derive(Parser)]
#[command(name = "rok", version, about = "Rosenbrock-Krylov integrator driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (CSV for sweep/stability, reference file otherwise).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomly generated problems.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate once and print a summary.
    Run,
    /// Work-precision sweep over strategies and tolerances.
    Sweep,
    /// Compute, cross-validate and save a reference solution.
    Reference,
    /// Spectral radii of the transfer matrices over a step-size grid.
    Stability,
    /// Print the default configuration.
    Defaults,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Command::Defaults = cli.command {
        return cmd_defaults(&mut out);
    }
    let cfg = load(cli)?;
    let out_path = cli.out.clone().or_else(|| cfg.output.path.clone());
    let registry = Registry::default();
    match cli.command {
        Command::Run => cmd_run(&registry, &cfg, out_path.as_deref(), &mut out).map(drop),
        Command::Sweep => cmd_sweep(&registry, &cfg, out_path.as_deref(), &mut out).map(drop),
        Command::Reference => cmd_reference(&registry, &cfg, out_path.as_deref(), &mut out).map(drop),
        Command::Stability => cmd_stability(&registry, &cfg, out_path.as_deref(), &mut out).map(drop),
        Command::Defaults => unreachable!(),
    }?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rok: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
