use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use splitkmc::cli::{run, Overrides};
use splitkmc::{Error, Mode};

/// Run a splitting KMC experiment described by a TOML configuration file.
#[derive(Debug, Parser)]
#[command(name = "splitkmc", version)]
struct Args {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured mode: sample, oracle or both.
    #[arg(long)]
    mode: Option<Mode>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Io(format!("{}: {e}", args.config.display())))
        .and_then(|text| {
            run(
                &text,
                &Overrides {
                    mode: args.mode,
                    out: args.out,
                    seed: args.seed,
                    threads: args.threads,
                },
            )
        });
    match result {
        Ok(summary) => {
            println!("wrote {} rows to {}", summary.rows.len(), summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let message = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{message}", e.kind());
            ExitCode::from(if e.kind() == "config" { 2 } else { 1 })
        }
    }
}
