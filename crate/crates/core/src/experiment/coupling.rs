use std::io::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{Check, ExperimentConfig, Violation};
use super::kinds::{Ctx, Semantic};
use super::SlopeThresholds;
use crate::ensemble::{Ensemble, TimeGrid};
use crate::error::{Error, Result};
use crate::mckean::{
    gradient_system_model, kuramoto_model, mean_field_ou, ou_reference, simulate, simulate_synchronous_coupling,
    CouplingReport, Potential, ReferenceLaw,
};
use crate::metrics::{fit_rate, kuramoto_order_parameter};
use crate::rng::make_rng;
use crate::schemes1d::{
    bossy_talay_run, burgers_scheme, l1_cdf_error, normal_cdf, uniform_grid, CdfScheme, Kernel1d, StepCdf,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingModel {
    /// `ou` (drift `−λx − κ(x − m)`) or `gradient` (`V = λx²/2`, `W = κx²/2`).
    pub family: String,
    pub lambda: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub m0: f64,
    pub v0: f64,
}

impl Default for CouplingModel {
    fn default() -> Self {
        Self {
            family: "ou".into(),
            lambda: 1.0,
            kappa: 1.0,
            sigma: 1.0,
            m0: 1.0,
            v0: 1.0,
        }
    }
}

impl Semantic for CouplingModel {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.family != "ou" && self.family != "gradient" {
            out.push(Violation::new("model.family", "expected \"ou\" or \"gradient\""));
        }
        if !(self.sigma >= 0.0) {
            out.push(Violation::new("model.sigma", "must be non-negative"));
        }
        if !(self.v0 >= 0.0) {
            out.push(Violation::new("model.v0", "must be non-negative"));
        }
        if cfg.n_list.first().is_some_and(|&n| n < 2) {
            out.push(Violation::new("n_list", "coupling needs N >= 2"));
        }
        out
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingThresholds {
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub r2_min: Option<f64>,
    pub uniform_in_time: Option<UniformInTime>,
}

impl CouplingThresholds {
    fn slope(&self) -> SlopeThresholds {
        SlopeThresholds::from_bounds(self.slope_min, self.slope_max, self.r2_min)
    }
}

impl Semantic for CouplingThresholds {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        self.slope().violations(cfg)
    }
}

impl Semantic for KuramotoThresholds {}

/// Uniform-in-time check: MSE at `mid` and `late` within `ratio_max` of each
/// other, both at most `growth_max` times the MSE at `early`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformInTime {
    pub early: f64,
    pub mid: f64,
    pub late: f64,
    pub ratio_max: f64,
    pub growth_max: f64,
}

pub(crate) fn run_coupling(ctx: &mut Ctx, m: &CouplingModel, th: &CouplingThresholds) -> Result<(Value, Vec<Check>)> {
    let t = ctx.time();
    let grid = TimeGrid::new(t.t0, t.t_end, t.dt)?;
    let reference = ReferenceLaw::from(ou_reference(m.lambda, m.kappa, m.m0, m.v0).with_sigma(m.sigma));
    let root = make_rng(ctx.seed, 0);
    let mut reports: Vec<CouplingReport> = Vec::new();
    for &n in &ctx.n_list.clone() {
        let rng = root.substream(n as u64);
        let report = if m.family == "ou" {
            let model = mean_field_ou(m.lambda, m.kappa, m.sigma);
            simulate_synchronous_coupling(&model, &reference, n, &grid, &rng, ctx.replicas)?
        } else {
            let model = gradient_system_model(
                Potential::Quadratic(m.lambda),
                Potential::Quadratic(m.kappa),
                m.sigma,
                1,
            )?;
            simulate_synchronous_coupling(&model, &reference, n, &grid, &rng, ctx.replicas)?
        };
        ctx.artifact(&format!("coupling_n{n}.csv"), |w| report.write_csv(w))?;
        reports.push(report);
    }

    let mut checks = Vec::new();
    let mut per_n = Vec::new();
    for r in &reports {
        let mut entry = json!({"n": r.n, "sup_mse": r.sup_mse, "final_mse": r.mse.last().copied().unwrap_or(0.0)});
        if let Some(u) = &th.uniform_in_time {
            let (e, a, b) = (r.mse_at(u.early), r.mse_at(u.mid), r.mse_at(u.late));
            let ratio = a.max(b) / a.min(b);
            let growth = a.max(b) / e;
            entry["mse_early"] = json!(e);
            entry["mse_mid"] = json!(a);
            entry["mse_late"] = json!(b);
            checks.push(Check::at_most(&format!("n{}_mid_late_ratio", r.n), ratio, u.ratio_max));
            checks.push(Check::at_most(
                &format!("n{}_growth_over_early", r.n),
                growth,
                u.growth_max,
            ));
        }
        per_n.push(entry);
    }
    let mut metrics = json!({"per_n": per_n});
    if reports.len() >= 3 {
        let fit = fit_rate(&reports.iter().map(|r| (r.n, r.sup_mse)).collect::<Vec<_>>())?;
        ctx.json_artifact("rate_fit.json", &fit)?;
        checks.extend(th.slope().checks(fit.slope, fit.r2));
        metrics["fit"] = serde_json::to_value(&fit)?;
    }
    Ok((metrics, checks))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BossyTalayModel {
    /// `heat` (`K1 = 0`, `K2 = σ`, exact oracle) or `burgers` (`K1 = H`).
    pub kernel: String,
    pub sigma: f64,
    /// Initial law: a point mass at `x0`.
    pub x0: f64,
    /// Integration grid for the L¹ error.
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_cells: usize,
    /// Extra CDF checkpoints written for replica 0; `t_end` is always included.
    pub checkpoints: Vec<f64>,
}

impl Default for BossyTalayModel {
    fn default() -> Self {
        Self {
            kernel: "heat".into(),
            sigma: 1.0,
            x0: 0.0,
            grid_lo: -8.0,
            grid_hi: 8.0,
            grid_cells: 16000,
            checkpoints: Vec::new(),
        }
    }
}

impl Semantic for BossyTalayModel {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.kernel != "heat" && self.kernel != "burgers" {
            out.push(Violation::new("model.kernel", "expected \"heat\" or \"burgers\""));
        }
        if !(self.sigma > 0.0) {
            out.push(Violation::new("model.sigma", "must be positive"));
        }
        if !(self.grid_hi > self.grid_lo) || self.grid_cells < 1 {
            out.push(Violation::new(
                "model.grid_lo",
                "need grid_lo < grid_hi and grid_cells >= 1",
            ));
        }
        if let Some(t) = cfg.time {
            if t.t0 != 0.0 {
                out.push(Violation::new("time.t0", "the scheme starts at 0"));
            }
            if self.checkpoints.iter().any(|c| !(*c >= 0.0 && *c <= t.t_end)) {
                out.push(Violation::new("model.checkpoints", "must lie in [0, t_end]"));
            }
        }
        out
    }
}

pub(crate) fn run_bossy_talay(ctx: &mut Ctx, m: &BossyTalayModel, th: &SlopeThresholds) -> Result<(Value, Vec<Check>)> {
    let t = ctx.time();
    let x0 = m.x0;
    let mut marks = m.checkpoints.clone();
    marks.push(t.t_end);
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    let heat = m.kernel == "heat";
    let grid = uniform_grid(m.grid_lo, m.grid_hi, m.grid_cells);
    let exact = |s: f64, x: f64| normal_cdf((x - x0) / (m.sigma * s.sqrt()));
    let root = make_rng(ctx.seed, 0);

    let mut per_n = Vec::new();
    let mut points = Vec::new();
    for &n in &ctx.n_list.clone() {
        let scheme = if heat {
            CdfScheme::new(
                Kernel1d::Zero,
                Kernel1d::Constant(m.sigma),
                n,
                t.dt,
                t.t_end,
                move |_| x0,
            )
        } else {
            burgers_scheme(m.sigma, move |_| x0, n, t.dt, t.t_end)
        }
        .with_checkpoints(marks.clone());
        let base = root.substream(n as u64);
        let runs: Vec<Result<Vec<StepCdf>>> = (0..ctx.replicas)
            .into_par_iter()
            .map(|r| bossy_talay_run(&scheme, &mut base.substream(r as u64)))
            .collect();
        let runs: Vec<Vec<StepCdf>> = runs.into_iter().collect::<Result<_>>()?;
        ctx.artifact(&format!("cdf_n{n}.csv"), |w| {
            crate::schemes1d::write_checkpoints_csv(w, &runs[0])
        })?;
        if heat {
            let errs: Vec<f64> = runs
                .par_iter()
                .map(|cdfs| {
                    let last = cdfs.last().expect("t_end is a checkpoint");
                    l1_cdf_error(last, |x| exact(last.time, x), &grid)
                })
                .collect();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            per_n.push(json!({"n": n, "mean_l1": mean}));
            points.push((n, mean));
        } else {
            per_n.push(json!({"n": n}));
        }
    }
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

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KuramotoModel {
    pub noise: f64,
    pub seeds: usize,
    /// Standard deviation of the concentrated initial law around 0.
    pub spread: f64,
    pub cases: Vec<KuramotoCase>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuramotoCase {
    pub coupling: f64,
    /// `concentrated` or `uniform`.
    pub init: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

impl Default for KuramotoModel {
    fn default() -> Self {
        Self {
            noise: 1.0,
            seeds: 20,
            spread: 0.1,
            cases: Vec::new(),
        }
    }
}

impl Semantic for KuramotoModel {
    fn violations(&self, _: &ExperimentConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.cases.is_empty() {
            out.push(Violation::new("model.cases", "must be non-empty"));
        }
        for (i, c) in self.cases.iter().enumerate() {
            if c.init != "concentrated" && c.init != "uniform" {
                out.push(Violation::new(
                    format!("model.cases[{i}].init"),
                    "expected \"concentrated\" or \"uniform\"",
                ));
            }
            if c.r_min.is_none() && c.r_max.is_none() {
                out.push(Violation::new(format!("model.cases[{i}]"), "needs r_min or r_max"));
            }
        }
        if self.seeds == 0 {
            out.push(Violation::new("model.seeds", "must be at least 1"));
        }
        if !(self.noise >= 0.0) || !(self.spread >= 0.0) {
            out.push(Violation::new("model.noise", "noise and spread must be non-negative"));
        }
        out
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KuramotoThresholds {
    pub min_successes: usize,
}

impl Default for KuramotoThresholds {
    fn default() -> Self {
        Self { min_successes: 18 }
    }
}

pub(crate) fn run_kuramoto(ctx: &mut Ctx, m: &KuramotoModel, th: &KuramotoThresholds) -> Result<(Value, Vec<Check>)> {
    let t = ctx.time();
    let grid = TimeGrid::new(t.t0, t.t_end, t.dt)?;
    let root = make_rng(ctx.seed, 0);
    let mut rows = Vec::new();
    let mut cases = Vec::new();
    let mut checks = Vec::new();
    for &n in &ctx.n_list.clone() {
        for (ci, case) in m.cases.iter().enumerate() {
            let model = kuramoto_model(case.coupling, None).with_noise(m.noise);
            let base = root.substream(n as u64).substream(ci as u64);
            let finals: Vec<Result<f64>> = (0..m.seeds)
                .into_par_iter()
                .map(|s| {
                    let mut rng = base.substream(s as u64);
                    let uniform = case.init == "uniform";
                    let e0 = Ensemble::from_fn(n, 1, |_, z| {
                        z[0] = if uniform {
                            rng.uniform_range(0.0, std::f64::consts::TAU)
                        } else {
                            m.spread * rng.gaussian()
                        }
                    })?;
                    let e = simulate(&model, &e0, &grid, &mut rng, &mut [])?;
                    Ok(kuramoto_order_parameter(e.states()))
                })
                .collect();
            let finals: Vec<f64> = finals.into_iter().collect::<Result<_>>()?;
            let ok = |r: f64| case.r_min.is_none_or(|lo| r >= lo) && case.r_max.is_none_or(|hi| r <= hi);
            let successes = finals.iter().filter(|r| ok(**r)).count();
            for (s, r) in finals.iter().enumerate() {
                rows.push((n, case.coupling, case.init.clone(), s, *r));
            }
            checks.push(Check::at_least(
                &format!("n{n}_k{}_{}_successes", case.coupling, case.init),
                successes as f64,
                th.min_successes as f64,
            ));
            cases.push(json!({
                "n": n, "coupling": case.coupling, "init": case.init,
                "successes": successes, "seeds": m.seeds,
                "r_mean": finals.iter().sum::<f64>() / finals.len() as f64,
                "r_min_observed": finals.iter().copied().fold(f64::INFINITY, f64::min),
                "r_max_observed": finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }));
        }
    }
    ctx.artifact("order_parameter.csv", |w| {
        writeln!(w, "n,coupling,init,seed,r_final")?;
        for (n, k, init, s, r) in &rows {
            writeln!(w, "{n},{k},{init},{s},{r}")?;
        }
        Ok(())
    })?;
    if checks.is_empty() {
        return Err(Error::Config("kuramoto sweep produced no cases".into()));
    }
    Ok((json!({"cases": cases}), checks))
}
