use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optrec::LogBase;
use optrec_cli::{run, CliError, Command, Format, Overrides, RangeSpec, RunConfig};

/// Revenue-constrained optimal recommendation distributions.
#[derive(Debug, Parser)]
#[command(name = "optrec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Minimum average revenue.
    #[arg(long, global = true, allow_hyphen_values = true, conflicts_with = "beta_range")]
    beta: Option<f64>,

    /// Revenue sweep as min:max:steps.
    #[arg(long, global = true, allow_hyphen_values = true, value_name = "MIN:MAX:STEPS")]
    beta_range: Option<RangeSpec>,

    /// Tilt sweep as min:max:steps.
    #[arg(long, global = true, allow_hyphen_values = true, value_name = "MIN:MAX:STEPS")]
    varpi_range: Option<RangeSpec>,

    /// Tilt at which `analyze` reports the partition.
    #[arg(long, global = true, allow_hyphen_values = true)]
    varpi: Option<f64>,

    /// Lattice resolution m for `oracle`.
    #[arg(long, global = true, value_name = "M")]
    grid: Option<u32>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte-Carlo trials for `simulate`.
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Sequence length for `simulate`.
    #[arg(long, global = true)]
    sequence_length: Option<u64>,

    /// Logarithm base: nats or bits.
    #[arg(long, global = true)]
    base: Option<LogBase>,

    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Optimal distribution for one revenue target.
    Solve,
    /// Revenue thresholds and collision probability.
    Thresholds,
    /// Optimal distributions over a revenue range.
    SweepBeta,
    /// Tilted distributions over a tilt range.
    SweepVarpi,
    /// Per-class peak and crossing coefficients.
    Analyze,
    /// Compare against exhaustive lattice search.
    Oracle,
    /// Monte-Carlo revenue and cross-entropy checks.
    Simulate,
}

impl From<&Cmd> for Command {
    fn from(c: &Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Thresholds => Command::Thresholds,
            Cmd::SweepBeta => Command::SweepBeta,
            Cmd::SweepVarpi => Command::SweepVarpi,
            Cmd::Analyze => Command::Analyze,
            Cmd::Oracle => Command::Oracle,
            Cmd::Simulate => Command::Simulate,
        }
    }
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("no configuration given (use --config <path>)".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        beta: cli.beta,
        beta_range: cli.beta_range,
        varpi_range: cli.varpi_range,
        partition_varpi: cli.varpi,
        grid: cli.grid,
        seed: cli.seed,
        base: cli.base,
        out: cli.out.clone(),
        trials: cli.trials,
        sequence_length: cli.sequence_length,
    });
    let cmd = Command::from(&cli.command);
    let format = cli.format.unwrap_or(cmd.default_format());
    let report = run(cmd, &cfg)?;
    let code = report.code;
    match &cfg.output {
        Some(p) => {
            let f = File::create(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?;
            let mut w = BufWriter::new(f);
            report.write(&mut w, format)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            report.write(&mut w, format)?;
            w.flush()?;
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
