use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use dphase_eig::cli::{run, ExperimentConfig, Overrides, Task};

/// Double phase eigenvalue experiments.
///
/// Exit status: 0 when every evaluated invariant passes, 1 when some
/// invariant fails, 2 on configuration, weight, solver or I/O errors.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the task named in the config.
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: dphase_eig::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            error!("cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let overrides = Overrides {
        task: args.task,
        output: args.out,
        seed: args.seed,
    };
    let report = ExperimentConfig::from_path(&args.config, &overrides).and_then(|c| run(&c));
    match report {
        Ok(r) if r.pass => {
            println!("{}: all evaluated invariants pass", r.config.task);
            ExitCode::SUCCESS
        }
        Ok(r) => {
            println!("{}: failed invariants {:?}", r.config.task, r.failed());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
