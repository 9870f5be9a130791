use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pressure_cli::{run, CliError, Command, LoadedConfig};

/// Finite-scale estimates of rescaled metric and topological pressure.
#[derive(Debug, Parser)]
#[command(name = "pressure", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.config.display())))?;
    let lc = LoadedConfig::parse(&text)?;
    let outcome = run(args.command, &lc, args.out.as_deref())?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Runtime { payload, .. } = &e {
                eprintln!("{payload}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
