use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use eitfem_cli::{parse_config, run, CliError};

/// Finite element laboratory for electrical impedance tomography.
#[derive(Debug, Parser)]
#[command(name = "eitfem", version)]
struct Args {
    /// run configuration (key=value lines)
    #[arg(long)]
    config: PathBuf,
    /// output directory; overrides `output=` in the configuration
    #[arg(long)]
    output: Option<PathBuf>,
    /// progress messages on stderr
    #[arg(long)]
    verbose: bool,
}

fn main_inner(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.clone(),
        source,
    })?;
    let cfg = parse_config(&text)?;
    let output = args
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    run(&cfg, &output, args.verbose)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
