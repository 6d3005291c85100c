//! `topotransfer` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
//! 4 I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<topotransfer::Error> for CliError {
    fn from(e: topotransfer::Error) -> Self {
        use topotransfer::Error as E;
        match e {
            E::Validation(_) | E::IndexOutOfRange { .. } | E::Capability(_) | E::EmptyInput => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "topotransfer",
    version,
    about = "Topological transfer protocols on Creutz ladders and SSH chains"
)]
struct Cli {
    /// TOML file with flat `key = value` settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one protocol and write its rung-occupation trajectory.
    Run(RunConfig),
    /// Transfer time against length, with a linear fit for fixed ℓ.
    ScanLength(RunConfig),
    /// Disorder-averaged fidelity and phase spread per disorder level.
    Sweep(RunConfig),
    /// Optimize the inner transfer controls of a multidomain lattice.
    Optimize(RunConfig),
    /// Dump a boundary state.
    States(RunConfig),
    /// Eigenvalues and zero-mode count of the static Hamiltonian.
    Spectrum(RunConfig),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::ScanLength(_) => "scan-length",
            Command::Sweep(_) => "sweep",
            Command::Optimize(_) => "optimize",
            Command::States(_) => "states",
            Command::Spectrum(_) => "spectrum",
        }
    }

    fn flags(&self) -> &RunConfig {
        match self {
            Command::Run(c)
            | Command::ScanLength(c)
            | Command::Sweep(c)
            | Command::Optimize(c)
            | Command::States(c)
            | Command::Spectrum(c) => c,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let base = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.merged(cli.command.flags());
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let report = match &cli.command {
        Command::Run(_) => commands::run(&cfg)?,
        Command::ScanLength(_) => commands::scan_length(&cfg)?,
        Command::Sweep(_) => commands::sweep(&cfg)?,
        Command::Optimize(_) => commands::optimize(&cfg)?,
        Command::States(_) => commands::states(&cfg)?,
        Command::Spectrum(_) => commands::spectrum(&cfg)?,
    };
    let name = cli.command.name();
    let text = report.render(cfg.format(), name, &cfg)?;
    match &cfg.output {
        Some(path) => {
            output::write_file(path, &text)?;
            println!("{}", report.summary_line(name));
        }
        None => {
            print!("{text}");
            eprintln!("{}", report.summary_line(name));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
