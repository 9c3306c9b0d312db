use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbdimer_cli::{load_config, run_tasks, sweep, RunConfig, Session, Task};

#[derive(Parser)]
#[command(name = "sbdimer", version, about = "Spectra, phase-space projections and absorption bands of a vibronic dimer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and the truncation check
    Spectrum(Common),
    /// Bloch projections of all kept states
    Bloch(Common),
    /// Adiabatic potentials and vertical transition energies
    Adiabatic(Common),
    /// Husimi grids with classical orbit overlays
    Husimi(Common),
    /// Stick spectra and band aggregates
    Absorb(Common),
    /// Spin ratios of the m = 0 amplitudes
    Ratio(Common),
    /// Full pipeline for every value of the configured sweep
    Sweep(Common),
    /// Every output
    All(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (key = value lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for cached eigensystems
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn tasks(cmd: &Command) -> &'static [Task] {
    match cmd {
        Command::Spectrum(_) => &[Task::Spectrum],
        Command::Bloch(_) => &[Task::Bloch],
        Command::Adiabatic(_) => &[Task::Adiabatic],
        Command::Husimi(_) => &[Task::Husimi],
        Command::Absorb(_) => &[Task::Absorb],
        Command::Ratio(_) => &[Task::Ratio],
        Command::Sweep(_) | Command::All(_) => &Task::ALL,
    }
}

fn run(cli: Cli) -> sbdimer_cli::Result<()> {
    let (Command::Spectrum(c)
    | Command::Bloch(c)
    | Command::Adiabatic(c)
    | Command::Husimi(c)
    | Command::Absorb(c)
    | Command::Ratio(c)
    | Command::Sweep(c)
    | Command::All(c)) = &cli.command;
    let mut cfg = match &c.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    let mut session = Session::new(c.cache.clone());
    if let Command::Sweep(_) = cli.command {
        let report = sweep(&mut session, &cfg, tasks(&cli.command))?;
        for r in &report.runs {
            match &r.outcome {
                Ok(m) => println!("{} {} files {}", r.dir.display(), m.entries.len(), m.sha256),
                Err(e) => eprintln!("{}: {e}", r.dir.display()),
            }
        }
        println!("{}", report.summary.display());
        return Ok(());
    }
    let manifest = run_tasks(&mut session, &cfg, tasks(&cli.command))?;
    for e in &manifest.entries {
        println!("{}  {}", e.sha256, manifest.dir.join(&e.path).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
