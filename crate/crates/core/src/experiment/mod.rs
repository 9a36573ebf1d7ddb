//! Config-driven experiment runner.
//!
//! A run reads one JSON config, writes `manifest.json`, per-run CSVs and
//! `summary.json` into the output directory, and reports a verdict against
//! the config's thresholds. Artifacts depend only on the config bytes and
//! the tool version; no timings or host details are recorded.

mod collisions;
mod config;
mod coupling;
mod kinds;
mod samplers;

use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

pub use config::{load_config, parse_config, validate, Check, ExperimentConfig, Summary, TimeSpec, Violation};
pub use kinds::Kind;

use crate::error::Error;

/// Why a run produced no verdict.
#[derive(Debug)]
pub enum RunError {
    /// Schema violations; nothing was written.
    Invalid(Vec<Violation>),
    /// Failure while simulating or writing artifacts.
    Runtime(Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(v) => {
                let lines: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "invalid config: {}", lines.join("; "))
            }
            RunError::Runtime(e) => write!(f, "run failed: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Runtime(e)
    }
}

/// Rate-fit bounds shared by several kinds.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeThresholds {
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub r2_min: Option<f64>,
}

impl kinds::Semantic for SlopeThresholds {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        let wants_fit = self.slope_min.is_some() || self.slope_max.is_some() || self.r2_min.is_some();
        if wants_fit && !cfg.n_list.is_empty() && cfg.n_list.len() < 3 {
            vec![Violation::new("n_list", "a rate fit needs at least 3 values of N")]
        } else {
            Vec::new()
        }
    }
}

impl SlopeThresholds {
    pub(crate) fn from_bounds(slope_min: Option<f64>, slope_max: Option<f64>, r2_min: Option<f64>) -> Self {
        Self {
            slope_min,
            slope_max,
            r2_min,
        }
    }

    pub(crate) fn checks(&self, slope: f64, r2: f64) -> Vec<Check> {
        let mut out = Vec::new();
        match (self.slope_min, self.slope_max) {
            (Some(lo), Some(hi)) => out.push(Check::within("slope", slope, lo, hi)),
            (Some(lo), None) => out.push(Check::at_least("slope", slope, lo)),
            (None, Some(hi)) => out.push(Check::at_most("slope", slope, hi)),
            (None, None) => {}
        }
        if let Some(r) = self.r2_min {
            out.push(Check::at_least("r2", r2, r));
        }
        out
    }
}

/// Validates `cfg`, runs it and writes all artifacts into `out_dir`.
///
/// Replica parallelism uses the current rayon pool; results do not depend
/// on its size.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Summary, RunError> {
    let violations = validate(cfg);
    if !violations.is_empty() {
        return Err(RunError::Invalid(violations));
    }
    let kind = Kind::parse(&cfg.kind).expect("validated");
    let seed = cfg.seed.expect("validated");
    fs::create_dir_all(out_dir).map_err(Error::from)?;
    let mut ctx = kinds::Ctx {
        seed,
        n_list: cfg.n_list.clone(),
        time: cfg.time,
        replicas: cfg.replicas,
        out: out_dir.to_path_buf(),
        artifacts: vec!["manifest.json".into()],
    };
    log::info!("running {} (seed {seed}) into {}", kind.name(), out_dir.display());
    let (model, metrics, checks) = kind.run(cfg, &mut ctx)?;

    let mut resolved = cfg.clone();
    resolved.model = model;
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": resolved,
    });
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    let summary = Summary::new(kind.name(), seed, metrics, checks, ctx.artifacts);
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// [`run`] inside a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<Summary, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| RunError::Runtime(Error::Config(format!("thread pool: {e}"))))?;
    pool.install(|| run(cfg, out_dir))
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
