use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use specfun_sp::error::{EXIT_INVARIANT, EXIT_OK};
use specfun_sp::{configure_threads, run, write_artifacts, CliError, RunConfig};

/// Run a Schrödinger–Poisson scenario described by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "specfun-sp", version)]
struct Args {
    /// Path to the run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn execute(args: &Args) -> Result<u8, CliError> {
    configure_threads()?;
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    let outcome = run(&cfg)?;
    write_artifacts(&cfg.out, &outcome.artifacts)?;
    if !args.quiet {
        println!("{}", cfg.command.name());
        for line in &outcome.summary {
            println!("  {line}");
        }
        for a in &outcome.artifacts {
            println!("  wrote {}", cfg.out.join(&a.name).display());
        }
    }
    match outcome.violation {
        Some(msg) => {
            eprintln!("specfun-sp: invariant violated: {msg}");
            Ok(EXIT_INVARIANT)
        }
        None => Ok(EXIT_OK),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("specfun-sp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
