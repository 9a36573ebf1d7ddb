use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::config::{section, Check, ExperimentConfig, TimeSpec, Violation};
use super::{collisions, coupling, samplers};
use crate::error::Result;

/// Experiment kinds understood by the runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    CouplingRate,
    DsmcCompare,
    CollisionConservation,
    KacChaos,
    Cbo,
    Eks,
    Cmc,
    BossyTalay,
    KuramotoSweep,
}

const KINDS: [(Kind, &str); 9] = [
    (Kind::CouplingRate, "coupling_rate"),
    (Kind::DsmcCompare, "dsmc_compare"),
    (Kind::CollisionConservation, "collision_conservation"),
    (Kind::KacChaos, "kac_chaos"),
    (Kind::Cbo, "cbo"),
    (Kind::Eks, "eks"),
    (Kind::Cmc, "cmc"),
    (Kind::BossyTalay, "bossy_talay"),
    (Kind::KuramotoSweep, "kuramoto_sweep"),
];

impl Kind {
    pub fn parse(s: &str) -> Option<Kind> {
        KINDS.iter().find(|(_, n)| *n == s).map(|(k, _)| *k)
    }

    pub fn names() -> Vec<&'static str> {
        KINDS.iter().map(|(_, n)| *n).collect()
    }

    pub fn name(self) -> &'static str {
        KINDS.iter().find(|(k, _)| *k == self).map(|(_, n)| *n).unwrap_or("")
    }

    pub(crate) fn validate(self, cfg: &ExperimentConfig) -> Vec<Violation> {
        match self {
            Kind::CouplingRate => check::<coupling::CouplingModel, coupling::CouplingThresholds>(cfg, true),
            Kind::DsmcCompare => check::<collisions::DsmcModel, collisions::RatioThreshold>(cfg, true),
            Kind::CollisionConservation => {
                check::<collisions::ConservationModel, collisions::DriftThreshold>(cfg, true)
            }
            Kind::KacChaos => check::<collisions::KacModel, super::SlopeThresholds>(cfg, true),
            Kind::Cbo => check::<samplers::CboModel, samplers::CboThresholds>(cfg, true),
            Kind::Eks => check::<samplers::EksModel, samplers::EksThresholds>(cfg, true),
            Kind::Cmc => check::<samplers::CmcModel, samplers::CmcThresholds>(cfg, false),
            Kind::BossyTalay => check::<coupling::BossyTalayModel, super::SlopeThresholds>(cfg, true),
            Kind::KuramotoSweep => check::<coupling::KuramotoModel, coupling::KuramotoThresholds>(cfg, true),
        }
    }

    /// Runs the experiment; returns the resolved model section, metrics and
    /// checks.
    pub(crate) fn run(self, cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<(Value, Value, Vec<Check>)> {
        fn go<M, T>(
            cfg: &ExperimentConfig,
            ctx: &mut Ctx,
            f: impl FnOnce(&mut Ctx, &M, &T) -> Result<(Value, Vec<Check>)>,
        ) -> Result<(Value, Value, Vec<Check>)>
        where
            M: DeserializeOwned + Default + Serialize,
            T: DeserializeOwned + Default,
        {
            let m: M = section(&cfg.model, "model").map_err(|v| crate::Error::Config(v.to_string()))?;
            let t: T = section(&cfg.thresholds, "thresholds").map_err(|v| crate::Error::Config(v.to_string()))?;
            let (metrics, checks) = f(ctx, &m, &t)?;
            Ok((serde_json::to_value(&m)?, metrics, checks))
        }
        match self {
            Kind::CouplingRate => go(cfg, ctx, coupling::run_coupling),
            Kind::DsmcCompare => go(cfg, ctx, collisions::run_dsmc_compare),
            Kind::CollisionConservation => go(cfg, ctx, collisions::run_conservation),
            Kind::KacChaos => go(cfg, ctx, collisions::run_kac),
            Kind::Cbo => go(cfg, ctx, samplers::run_cbo),
            Kind::Eks => go(cfg, ctx, samplers::run_eks),
            Kind::Cmc => go(cfg, ctx, samplers::run_cmc),
            Kind::BossyTalay => go(cfg, ctx, coupling::run_bossy_talay),
            Kind::KuramotoSweep => go(cfg, ctx, coupling::run_kuramoto),
        }
    }
}

/// Semantic checks of a typed section beyond what deserialization enforces.
pub(crate) trait Semantic {
    fn violations(&self, _cfg: &ExperimentConfig) -> Vec<Violation> {
        Vec::new()
    }
}

fn check<M, T>(cfg: &ExperimentConfig, needs_time: bool) -> Vec<Violation>
where
    M: DeserializeOwned + Default + Semantic,
    T: DeserializeOwned + Default + Semantic,
{
    let mut out = Vec::new();
    if needs_time && cfg.time.is_none() {
        out.push(Violation::new("time", "required for this kind"));
    }
    match section::<M>(&cfg.model, "model") {
        Ok(m) => out.extend(m.violations(cfg)),
        Err(v) => out.push(v),
    }
    match section::<T>(&cfg.thresholds, "thresholds") {
        Ok(t) => out.extend(t.violations(cfg)),
        Err(v) => out.push(v),
    }
    out
}

/// Run context: resolved common fields and the artifact directory.
pub(crate) struct Ctx {
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub time: Option<TimeSpec>,
    pub replicas: usize,
    pub out: PathBuf,
    pub artifacts: Vec<String>,
}

impl Ctx {
    pub fn time(&self) -> TimeSpec {
        self.time.expect("validated")
    }

    /// Creates `name` in the output directory and records it.
    pub fn artifact(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path: &Path = &self.out;
        let mut w = BufWriter::new(File::create(path.join(name))?);
        write(&mut w)?;
        w.flush()?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn json_artifact<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        self.artifact(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}
