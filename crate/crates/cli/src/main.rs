use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfit_core::pipeline::{evaluate_to_file, fit_to_dir, generate_to_dir};
use mfit_core::{ExperimentConfig, MfError};

#[derive(Parser)]
#[command(name = "mfit", version, about = "Fit a manifold to samples with large Gaussian noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample clean and noisy point clouds from the configured manifold.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the reconstruction on a generated dataset.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a net or manifold file against the ground truth.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

const CONTRACT: u8 = 1;
const USAGE: u8 = 2;

fn exit_code(e: &MfError) -> u8 {
    match e {
        MfError::InvalidInput(_) | MfError::Format(_) | MfError::Io(_) => USAGE,
        _ => CONTRACT,
    }
}

fn threads() -> Result<usize, String> {
    match std::env::var("MF_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("MF_THREADS must be a positive integer, got {v:?}")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<u8, MfError> {
    match cli.command {
        Command::Generate { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            for p in generate_to_dir(&cfg, &out)? {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Fit { config, data, out } => {
            let threads = match threads() {
                Ok(t) => t,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return Ok(USAGE);
                }
            };
            let cfg = ExperimentConfig::load(&config)?;
            for p in fit_to_dir(&cfg, &data, &out, threads)? {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Evaluate { truth, artifact, report } => {
            let rep = evaluate_to_file(&truth, &artifact, &report)?;
            for c in &rep.checks {
                let verdict = if c.passed { "pass" } else { "FAIL" };
                println!("{verdict:4}  {:<30} {:.3e} (limit {:.3e})", c.name, c.value, c.threshold);
            }
            println!("wrote {}", report.display());
            Ok(if rep.all_passed() { 0 } else { CONTRACT })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
