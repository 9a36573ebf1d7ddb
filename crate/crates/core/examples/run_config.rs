//! Runs a JSON experiment config through the library API, as the CLI does.
//!
//! `cargo run --example run_config -- configs/cmc_gaussian.json out/cmc`

use std::path::PathBuf;

use meanfield::experiment::{load_config, run};

fn main() {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/cmc_gaussian.json".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/example".into()));
    let cfg = load_config(&config).unwrap_or_else(|v| panic!("{v:?}"));
    match run(&cfg, &out) {
        Ok(s) => {
            for c in &s.checks {
                println!(
                    "{} = {} ({}) {}",
                    c.name,
                    c.value,
                    c.bound,
                    if c.passed { "ok" } else { "failed" }
                );
            }
            println!("passed: {}, artifacts in {}", s.passed, out.display());
        }
        Err(e) => eprintln!("{e}"),
    }
}
