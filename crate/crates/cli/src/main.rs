use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use collapse_lab::config::{ExperimentKind, OutputFormat};
use collapse_lab::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Command {
    Collapse,
    Ensemble,
    Measurement,
    Records,
    Spin,
    Decay,
    /// Check a config file without running it.
    Validate,
}

/// Run a collapse experiment from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "collapse-lab", version = collapse_lab::VERSION)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Data file path; the summary goes next to it as `<stem>.summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn dispatch(args: &Args) -> Result<(), CliError> {
    collapse_lab::init_threads()?;
    let kind = match args.command {
        Command::Validate => {
            println!("{}", collapse_lab::validate(&args.config)?);
            return Ok(());
        }
        Command::Collapse => ExperimentKind::Collapse,
        Command::Ensemble => ExperimentKind::Ensemble,
        Command::Measurement => ExperimentKind::Measurement,
        Command::Records => ExperimentKind::Records,
        Command::Spin => ExperimentKind::Spin,
        Command::Decay => ExperimentKind::Decay,
    };
    let plan = collapse_lab::run(kind, &args.config, args.seed, args.out.as_deref(), args.format)?;
    eprintln!("wrote {} and {}", plan.data.display(), plan.summary().display());
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("collapse-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
