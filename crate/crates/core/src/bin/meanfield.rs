use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meanfield::experiment::{load_config, run_with_threads, validate, RunError};

#[derive(Parser)]
#[command(name = "meanfield", version, about = "Run seeded mean-field particle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Worker threads for replica parallelism.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without simulating.
    Validate { config: PathBuf },
}

const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_THRESHOLD: u8 = 4;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Validate { config } => {
            let violations = match load_config(&config) {
                Ok(cfg) => validate(&cfg),
                Err(v) => v,
            };
            if violations.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                for v in &violations {
                    eprintln!("{v}");
                }
                ExitCode::from(EXIT_INVALID)
            }
        }
        Command::Run { config, threads, out } => {
            let cfg = match load_config(&config) {
                Ok(cfg) => cfg,
                Err(violations) => {
                    for v in &violations {
                        eprintln!("{v}");
                    }
                    return ExitCode::from(EXIT_INVALID);
                }
            };
            let dir = out
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| Path::new("out").join(&cfg.kind));
            match run_with_threads(&cfg, &dir, threads) {
                Ok(summary) => {
                    for c in &summary.checks {
                        let tag = match (c.passed, c.advisory) {
                            (true, _) => "pass",
                            (false, true) => "advisory",
                            (false, false) => "FAIL",
                        };
                        println!("{tag:8} {} = {} ({})", c.name, c.value, c.bound);
                    }
                    println!("artifacts in {}", dir.display());
                    if summary.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_THRESHOLD)
                    }
                }
                Err(RunError::Invalid(violations)) => {
                    for v in &violations {
                        eprintln!("{v}");
                    }
                    ExitCode::from(EXIT_INVALID)
                }
                Err(e @ RunError::Runtime(_)) => {
                    eprintln!("{e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
    }
}
