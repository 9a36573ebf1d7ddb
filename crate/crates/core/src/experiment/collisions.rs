use std::io::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{Check, ExperimentConfig, Violation};
use super::kinds::{Ctx, Semantic};
use super::SlopeThresholds;
use crate::boltzmann::{
    bird_simulate, conservation_report, exact_simulate, hard_sphere_model, maxwell_isotropic, CellGrid, CollisionModel,
    RunOptions,
};
use crate::ensemble::{Ensemble, TimeGrid};
use crate::error::Result;
use crate::metrics::{fit_rate, pair_covariance, pooled_pair_covariance, wasserstein_1d};
use crate::rng::{make_rng, RngStream};

/// Initial velocity laws, all with unit variance per coordinate.
fn initial_velocities(init: &str, n: usize, dim: usize, rng: &mut RngStream) -> Result<Ensemble> {
    let half = 3f64.sqrt();
    let mut e = Ensemble::from_fn(n, dim, |_, z| match init {
        "uniform" => z.iter_mut().for_each(|v| *v = rng.uniform_range(-half, half)),
        _ => rng.fill_gaussian(z),
    })?;
    if init == "sphere" {
        // Project onto zero momentum and total energy n·dim.
        let mean = e.measure().mean();
        for z in e.states_mut().chunks_exact_mut(dim) {
            z.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
        }
        let energy: f64 = e.states().iter().map(|v| v * v).sum();
        let s = ((n * dim) as f64 / energy).sqrt();
        e.states_mut().iter_mut().for_each(|v| *v *= s);
    }
    Ok(e)
}

fn check_init(init: &str, allowed: &[&str]) -> Option<Violation> {
    (!allowed.contains(&init)).then(|| Violation::new("model.init", format!("expected one of {}", allowed.join(", "))))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsmcModel {
    pub dim: usize,
    /// Constant Maxwell collision rate.
    pub rate: f64,
    /// `uniform` or `gaussian`.
    pub init: String,
    pub pairs: usize,
    pub cell_volume: f64,
}

impl Default for DsmcModel {
    fn default() -> Self {
        Self {
            dim: 3,
            rate: 1.0,
            init: "uniform".into(),
            pairs: 5,
            cell_volume: 1.0,
        }
    }
}

impl Semantic for DsmcModel {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        let mut out: Vec<Violation> = check_init(&self.init, &["uniform", "gaussian"]).into_iter().collect();
        if self.dim < 2 {
            out.push(Violation::new("model.dim", "must be at least 2"));
        }
        if !(self.rate >= 0.0) {
            out.push(Violation::new("model.rate", "must be non-negative"));
        }
        if self.pairs == 0 {
            out.push(Violation::new("model.pairs", "must be at least 1"));
        }
        if !(self.cell_volume > 0.0) {
            out.push(Violation::new("model.cell_volume", "must be positive"));
        }
        if cfg.n_list.first().is_some_and(|&n| n < 2) {
            out.push(Violation::new("n_list", "collisions need N >= 2"));
        }
        out
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioThreshold {
    pub ratio_max: f64,
}

impl Default for RatioThreshold {
    fn default() -> Self {
        Self { ratio_max: 3.0 }
    }
}

impl Semantic for RatioThreshold {}

impl Semantic for DriftThreshold {}

/// Exact vs Bird on the first velocity coordinate. Pair `p` uses substreams
/// `3p` and `3p + 1` for two exact runs and `3p + 2` for Bird; each run
/// draws its own initial data.
pub(crate) fn run_dsmc_compare(ctx: &mut Ctx, m: &DsmcModel, th: &RatioThreshold) -> Result<(Value, Vec<Check>)> {
    let t = ctx.time();
    let model = maxwell_isotropic(m.dim, m.rate)?;
    let grid = TimeGrid::new(t.t0, t.t_end, t.dt)?;
    let cells = CellGrid::single(m.cell_volume)?;
    let horizon = t.t_end - t.t0;
    let opts = RunOptions::counters_only();
    let root = make_rng(ctx.seed, 0);
    let mut per_n = Vec::new();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &n in &ctx.n_list.clone() {
        let base = root.substream(n as u64);
        let runs: Vec<Result<(f64, f64)>> = (0..m.pairs)
            .into_par_iter()
            .map(|p| {
                let final_vx = |tag: u64, bird: bool| -> Result<Vec<f64>> {
                    let mut rng = base.substream(tag);
                    let e0 = initial_velocities(&m.init, n, m.dim, &mut rng)?;
                    let run = if bird {
                        bird_simulate(&model, &cells, &e0, &grid, &mut rng, &opts)?
                    } else {
                        exact_simulate(&model, &e0, horizon, &mut rng, &opts)?
                    };
                    Ok(run.ensemble.coordinate(0))
                };
                let p = p as u64;
                let a = final_vx(3 * p, false)?;
                let b = final_vx(3 * p + 1, false)?;
                let c = final_vx(3 * p + 2, true)?;
                Ok((wasserstein_1d(&a, &b, 1)?, wasserstein_1d(&a, &c, 1)?))
            })
            .collect();
        let runs: Vec<(f64, f64)> = runs.into_iter().collect::<Result<_>>()?;
        let self_mean = runs.iter().map(|r| r.0).sum::<f64>() / runs.len() as f64;
        let cross_mean = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
        for (p, (s, c)) in runs.iter().enumerate() {
            rows.push((n, p, *s, *c));
        }
        let ratio = cross_mean / self_mean;
        checks.push(Check::at_most(&format!("n{n}_cross_over_self"), ratio, th.ratio_max));
        per_n.push(json!({"n": n, "w1_self_mean": self_mean, "w1_cross_mean": cross_mean, "ratio": ratio}));
    }
    ctx.artifact("w1_pairs.csv", |w| {
        writeln!(w, "n,pair,w1_exact_exact,w1_exact_bird")?;
        for (n, p, s, c) in &rows {
            writeln!(w, "{n},{p},{s},{c}")?;
        }
        Ok(())
    })?;
    Ok((json!({"per_n": per_n}), checks))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConservationModel {
    /// `maxwell` (constant rate) or `hard_sphere` (rate `|v − v*|`, capped).
    pub collision: String,
    pub dim: usize,
    /// Maxwell rate, or the hard-sphere cap.
    pub rate: f64,
    pub init: String,
    /// Number of equally spaced audit times after the initial one.
    pub snapshots: usize,
    /// Whether to write the accepted-event log of the first N.
    pub write_events: bool,
}

impl Default for ConservationModel {
    fn default() -> Self {
        Self {
            collision: "maxwell".into(),
            dim: 3,
            rate: 1.0,
            init: "gaussian".into(),
            snapshots: 20,
            write_events: true,
        }
    }
}

impl Semantic for ConservationModel {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        let mut out: Vec<Violation> = check_init(&self.init, &["uniform", "gaussian", "sphere"])
            .into_iter()
            .collect();
        if self.collision != "maxwell" && self.collision != "hard_sphere" {
            out.push(Violation::new(
                "model.collision",
                "expected \"maxwell\" or \"hard_sphere\"",
            ));
        }
        if self.dim < 2 {
            out.push(Violation::new("model.dim", "must be at least 2"));
        }
        if !(self.rate > 0.0) {
            out.push(Violation::new("model.rate", "must be positive"));
        }
        if self.snapshots == 0 {
            out.push(Violation::new("model.snapshots", "must be at least 1"));
        }
        if cfg.n_list.first().is_some_and(|&n| n < 2) {
            out.push(Violation::new("n_list", "collisions need N >= 2"));
        }
        out
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftThreshold {
    pub drift_max: f64,
}

impl Default for DriftThreshold {
    fn default() -> Self {
        Self { drift_max: 1e-8 }
    }
}

pub(crate) fn run_conservation(
    ctx: &mut Ctx,
    m: &ConservationModel,
    th: &DriftThreshold,
) -> Result<(Value, Vec<Check>)> {
    fn one<M: CollisionModel>(
        ctx: &mut Ctx,
        model: &M,
        m: &ConservationModel,
        n: usize,
        first: bool,
    ) -> Result<crate::boltzmann::ConservationReport> {
        let t = ctx.time();
        let horizon = t.t_end - t.t0;
        let mut rng = make_rng(ctx.seed, 0).substream(n as u64);
        let e0 = initial_velocities(&m.init, n, m.dim, &mut rng)?;
        let marks: Vec<f64> = (1..=m.snapshots)
            .map(|k| horizon * k as f64 / m.snapshots as f64)
            .collect();
        let opts = RunOptions::default().with_snapshots(marks);
        let run = exact_simulate(model, &e0, horizon, &mut rng, &opts)?;
        if first && m.write_events {
            ctx.artifact(&format!("events_n{n}.csv"), |w| run.log.write_csv(w, m.dim))?;
        }
        Ok(conservation_report(&run.snapshots, &run.log, model.velocity_range()))
    }

    let mut per_n = Vec::new();
    let mut checks = Vec::new();
    for (k, &n) in ctx.n_list.clone().iter().enumerate() {
        let rep = if m.collision == "maxwell" {
            one(ctx, &maxwell_isotropic(m.dim, m.rate)?, m, n, k == 0)?
        } else {
            one(ctx, &hard_sphere_model(m.rate, m.dim)?, m, n, k == 0)?
        };
        checks.push(Check::at_most(
            &format!("n{n}_momentum_drift"),
            rep.momentum_drift,
            th.drift_max,
        ));
        checks.push(Check::at_most(
            &format!("n{n}_energy_drift"),
            rep.energy_drift,
            th.drift_max,
        ));
        per_n.push(json!({
            "n": n,
            "momentum_drift": rep.momentum_drift,
            "energy_drift": rep.energy_drift,
            "max_event_energy": rep.max_event_energy,
            "max_event_momentum": rep.max_event_momentum,
            "events": rep.events,
        }));
    }
    Ok((json!({"per_n": per_n}), checks))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KacModel {
    pub dim: usize,
    pub rate: f64,
    /// `sphere` (zero momentum, energy N·dim), `gaussian` or `uniform`.
    pub init: String,
    /// Test function applied to the first velocity coordinate; `tanh` only.
    pub phi: String,
}

impl Default for KacModel {
    fn default() -> Self {
        Self {
            dim: 3,
            rate: 1.0,
            init: "sphere".into(),
            phi: "tanh".into(),
        }
    }
}

impl Semantic for KacModel {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        let mut out: Vec<Violation> = check_init(&self.init, &["uniform", "gaussian", "sphere"])
            .into_iter()
            .collect();
        if self.phi != "tanh" {
            out.push(Violation::new("model.phi", "only \"tanh\" is supported"));
        }
        if self.dim < 2 {
            out.push(Violation::new("model.dim", "must be at least 2"));
        }
        if !(self.rate >= 0.0) {
            out.push(Violation::new("model.rate", "must be non-negative"));
        }
        if cfg.n_list.first().is_some_and(|&n| n < 2) {
            out.push(Violation::new("n_list", "pair covariance needs N >= 2"));
        }
        if cfg.replicas < 2 {
            out.push(Violation::new("replicas", "pair covariance needs at least 2 replicas"));
        }
        out
    }
}

/// Pooled exchangeable pair covariance of `tanh(v₁)` across replicas, per N.
pub(crate) fn run_kac(ctx: &mut Ctx, m: &KacModel, th: &SlopeThresholds) -> Result<(Value, Vec<Check>)> {
    let t = ctx.time();
    let horizon = t.t_end - t.t0;
    let model = maxwell_isotropic(m.dim, m.rate)?;
    let opts = RunOptions::counters_only();
    let root = make_rng(ctx.seed, 0);
    let mut per_n = Vec::new();
    let mut points = Vec::new();
    for &n in &ctx.n_list.clone() {
        let base = root.substream(n as u64);
        let finals: Vec<Result<Vec<f64>>> = (0..ctx.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = base.substream(r as u64);
                let e0 = initial_velocities(&m.init, n, m.dim, &mut rng)?;
                Ok(exact_simulate(&model, &e0, horizon, &mut rng, &opts)?
                    .ensemble
                    .coordinate(0))
            })
            .collect();
        let finals: Vec<Vec<f64>> = finals.into_iter().collect::<Result<_>>()?;
        let pooled = pooled_pair_covariance(&finals, f64::tanh);
        let first: Vec<f64> = finals.iter().map(|v| v[0]).collect();
        let second: Vec<f64> = finals.iter().map(|v| v[1]).collect();
        let labelled = pair_covariance(&first, &second, f64::tanh);
        per_n.push(json!({"n": n, "pooled_cov": pooled, "pair01_cov": labelled}));
        points.push((n, pooled.abs()));
    }
    ctx.artifact("pair_covariance.csv", |w| {
        writeln!(w, "n,abs_pooled_cov")?;
        for (n, c) in &points {
            writeln!(w, "{n},{c}")?;
        }
        Ok(())
    })?;
    let mut metrics = json!({"per_n": per_n});
    let mut checks = Vec::new();
    if points.len() >= 3 {
        let fit = fit_rate(&points)?;
        ctx.json_artifact("rate_fit.json", &fit)?;
        checks.extend(th.checks(fit.slope, fit.r2));
        metrics["fit"] = serde_json::to_value(&fit)?;
    }
    Ok((metrics, checks))
}
