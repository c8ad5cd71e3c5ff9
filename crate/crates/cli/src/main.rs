use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kickedtop_cli::{run, CliError, ExperimentConfig, ExperimentKind};

/// Trotterized collective-spin experiments.
#[derive(Parser)]
#[command(name = "kickedtop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Long-time Trotter errors over a grid of step sizes.
    ThresholdSweep(RunArgs),
    /// Participation ratio and spacing ratio of the Floquet operator.
    Spectrum(RunArgs),
    /// Squared-commutator series, growth rates and saturation values.
    Otoc(RunArgs),
    /// Classical map point clouds.
    Poincare(RunArgs),
    /// Long-range chain heating and eigenstate delocalization.
    ChainMap(RunArgs),
    /// Frame potential and spacing ratios of random-quench unitaries.
    Twodesign(RunArgs),
    /// Statistical-correlation OTOC estimate next to the exact value.
    RandomizedOtoc(RunArgs),
    /// Print the default configuration of an experiment as TOML.
    Defaults {
        /// Experiment kind, e.g. threshold-sweep.
        kind: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file; keys it sets override the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(kind, &text).map_err(CliError::Config)?
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::ThresholdSweep(a) => (ExperimentKind::ThresholdSweep, a),
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Otoc(a) => (ExperimentKind::Otoc, a),
        Command::Poincare(a) => (ExperimentKind::Poincare, a),
        Command::ChainMap(a) => (ExperimentKind::ChainMap, a),
        Command::Twodesign(a) => (ExperimentKind::Twodesign, a),
        Command::RandomizedOtoc(a) => (ExperimentKind::RandomizedOtoc, a),
        Command::Defaults { kind } => {
            return match kind.parse::<ExperimentKind>() {
                Ok(k) => {
                    print!("{}", ExperimentConfig::defaults_toml(k));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    match resolve(kind, &args).and_then(|cfg| run(&cfg)) {
        Ok(report) => {
            for f in &report.csv_files {
                println!("{}", f.display());
            }
            println!("{}", report.sidecar.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
