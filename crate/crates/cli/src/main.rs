use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use membrane_cli::commands::{self, format_checks, to_json};
use membrane_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "membrane", version, about = "Phase-field membranes on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set model.kappa=2`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Relax a composition with the conserved Allen–Cahn flow.
    Relax(ConfigArgs),
    /// Tabulate J_ε, K and the reduced energy against their sharp limits.
    GammaStudy {
        #[command(flatten)]
        args: ConfigArgs,
        /// Comma-separated interface widths; overrides `gamma.eps`.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Axisymmetric sharp-interface flow, comparisons and jump study.
    Axisym(ConfigArgs),
    /// Energy report of a checkpoint.
    Energy { checkpoint: PathBuf },
    /// Run the built-in invariant suite.
    Selftest,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("MEMBRANE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("MEMBRANE_THREADS = '{v}' is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Relax(args) => {
            let summary = commands::relax(&args.load()?)?;
            print!("{}", to_json(&summary));
        }
        Command::GammaStudy { args, eps } => {
            let mut config = args.load()?;
            if let Some(eps) = eps {
                config.gamma.eps = eps;
                config.validate()?;
            }
            print!("{}", to_json(&commands::gamma_study(&config)?));
        }
        Command::Axisym(args) => {
            print!("{}", to_json(&commands::axisym(&args.load()?)?));
        }
        Command::Energy { checkpoint } => {
            print!("{}", to_json(&commands::energy(&checkpoint)?));
        }
        Command::Selftest => {
            let checks = commands::selftest()?;
            print!("{}", format_checks(&checks));
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Selftest(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("membrane: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
