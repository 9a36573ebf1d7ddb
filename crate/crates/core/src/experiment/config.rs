use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::kinds::Kind;

/// Time grid of a config.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

/// One experiment, as read from a JSON document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub model: Value,
    #[serde(default)]
    pub thresholds: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn one() -> usize {
    1
}

/// A schema violation, naming the offending field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Parses a config document; a malformed document yields a single violation.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, Vec<Violation>> {
    serde_json::from_str(text).map_err(|e| vec![Violation::new("config", e.to_string())])
}

pub fn load_config(path: &Path) -> std::result::Result<ExperimentConfig, Vec<Violation>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Violation::new("config", format!("{}: {e}", path.display()))])?;
    parse_config(&text)
}

/// Typed view of an untyped section; `null` means all defaults.
pub(crate) fn section<T: DeserializeOwned + Default>(v: &Value, field: &str) -> std::result::Result<T, Violation> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Violation::new(field, e.to_string()))
}

/// Schema checks only; an empty list means the config is runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if cfg.seed.is_none() {
        out.push(Violation::new("seed", "missing; seeds are never generated implicitly"));
    }
    if cfg.n_list.is_empty() {
        out.push(Violation::new("n_list", "must be non-empty"));
    } else if cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        out.push(Violation::new("n_list", "must be strictly ascending"));
    }
    if cfg.replicas == 0 {
        out.push(Violation::new("replicas", "must be at least 1"));
    }
    if let Some(t) = cfg.time {
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            out.push(Violation::new("time.dt", "must be positive"));
        }
        if !(t.t_end > t.t0 && t.t_end.is_finite() && t.t0.is_finite()) {
            out.push(Violation::new("time.t_end", "must exceed time.t0"));
        }
    }
    match Kind::parse(&cfg.kind) {
        Some(kind) => out.extend(kind.validate(cfg)),
        None => out.push(Violation::new(
            "kind",
            format!(
                "unknown kind {:?}; expected one of {}",
                cfg.kind,
                Kind::names().join(", ")
            ),
        )),
    }
    out
}

/// Outcome of one threshold comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
    /// Reported only; does not affect the run's verdict.
    pub advisory: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {max}"),
            passed: value <= max,
            advisory: false,
        }
    }

    pub fn at_least(name: &str, value: f64, min: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!(">= {min}"),
            passed: value >= min,
            advisory: false,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            passed: value >= lo && value <= hi,
            advisory: false,
        }
    }

    pub fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub kind: String,
    pub seed: u64,
    pub metrics: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub(crate) fn new(kind: &str, seed: u64, metrics: Value, checks: Vec<Check>, artifacts: Vec<String>) -> Self {
        let passed = checks.iter().all(|c| c.passed || c.advisory);
        Self {
            kind: kind.into(),
            seed,
            metrics,
            checks,
            passed,
            artifacts,
        }
    }
}
