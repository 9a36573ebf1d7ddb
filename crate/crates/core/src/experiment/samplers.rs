use std::io::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{Check, ExperimentConfig, Violation};
use super::kinds::{Ctx, Semantic};
use crate::ensemble::{Ensemble, TimeGrid};
use crate::error::{Error, Result};
use crate::jump::{cmc_run, CmcConfig};
use crate::optimizer::{
    cbo_minimize, eks_sample, ensemble_moments, posterior_gaussian_oracle, rastrigin, CboConfig, CboResult, EksConfig,
    ForwardMap,
};
use crate::rng::make_rng;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CboModel {
    /// `quadratic` (`|x − x*|²`) or `rastrigin` (shifted so its minimum is `x*`).
    pub objective: String,
    pub dim: usize,
    pub target: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub eps: f64,
    pub init_lo: f64,
    pub init_hi: f64,
    pub seeds: usize,
}

impl Default for CboModel {
    fn default() -> Self {
        Self {
            objective: "quadratic".into(),
            dim: 2,
            target: vec![1.0, -0.5],
            alpha: 30.0,
            lambda: 3.0,
            sigma: 1.5,
            eps: 1e-5,
            init_lo: -3.0,
            init_hi: 3.0,
            seeds: 20,
        }
    }
}

impl Semantic for CboModel {
    fn violations(&self, _: &ExperimentConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.objective != "quadratic" && self.objective != "rastrigin" {
            out.push(Violation::new(
                "model.objective",
                "expected \"quadratic\" or \"rastrigin\"",
            ));
        }
        if self.dim == 0 {
            out.push(Violation::new("model.dim", "must be at least 1"));
        }
        if self.target.len() != self.dim {
            out.push(Violation::new(
                "model.target",
                format!("needs {} coordinates", self.dim),
            ));
        }
        if !(self.alpha > 0.0) {
            out.push(Violation::new("model.alpha", "must be positive"));
        }
        if !(self.lambda >= 0.0) || !(self.sigma >= 0.0) || !(self.eps >= 0.0) {
            out.push(Violation::new(
                "model.lambda",
                "lambda, sigma and eps must be non-negative",
            ));
        }
        if !(self.init_hi > self.init_lo) {
            out.push(Violation::new("model.init_lo", "need init_lo < init_hi"));
        }
        if self.seeds == 0 {
            out.push(Violation::new("model.seeds", "must be at least 1"));
        }
        out
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CboThresholds {
    /// Success radius around the target.
    pub tolerance: f64,
    pub min_successes: usize,
    /// Report the success count without letting it fail the run.
    pub advisory: bool,
}

impl Default for CboThresholds {
    fn default() -> Self {
        Self {
            tolerance: 1e-2,
            min_successes: 18,
            advisory: false,
        }
    }
}

impl Semantic for CboThresholds {}

impl Semantic for EksThresholds {}

impl Semantic for CmcThresholds {}

pub(crate) fn run_cbo(ctx: &mut Ctx, m: &CboModel, th: &CboThresholds) -> Result<(Value, Vec<Check>)> {
    let t = ctx.time();
    let grid = TimeGrid::new(t.t0, t.t_end, t.dt)?;
    let target = m.target.clone();
    let root = make_rng(ctx.seed, 0);
    let mut per_n = Vec::new();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (k, &n) in ctx.n_list.clone().iter().enumerate() {
        let shift = target.clone();
        let mut cfg = if m.objective == "quadratic" {
            CboConfig::new(
                move |x: &[f64]| x.iter().zip(&shift).map(|(a, b)| (a - b) * (a - b)).sum(),
                m.dim,
            )
        } else {
            CboConfig::new(
                move |x: &[f64]| rastrigin(&x.iter().zip(&shift).map(|(a, b)| a - b).collect::<Vec<_>>()),
                m.dim,
            )
        }
        .init_uniform(m.init_lo, m.init_hi);
        cfg.n = n;
        cfg.alpha = m.alpha;
        cfg.lambda = m.lambda;
        cfg.sigma = m.sigma;
        cfg.eps = m.eps;
        cfg.dt = t.dt;
        cfg.steps = grid.steps;
        let base = root.substream(n as u64);
        let results: Vec<Result<CboResult>> = (0..m.seeds)
            .into_par_iter()
            .map(|s| cbo_minimize(&cfg, &mut base.substream(s as u64)))
            .collect();
        let results: Vec<CboResult> = results.into_iter().collect::<Result<_>>()?;
        let dist = |v: &[f64]| {
            v.iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let mut successes = 0;
        for (s, r) in results.iter().enumerate() {
            let e = dist(&r.consensus);
            successes += usize::from(e <= th.tolerance);
            rows.push((n, s, e, r.objective_at_consensus));
        }
        if k == 0 {
            let first = &results[0];
            ctx.artifact("cbo_trajectory.csv", |w| first.write_trajectory_csv(w))?;
            ctx.json_artifact(
                "cbo_result.json",
                &json!({
                    "consensus": first.consensus,
                    "objective_at_consensus": first.objective_at_consensus,
                    "trajectory_csv": "cbo_trajectory.csv",
                }),
            )?;
        }
        let check = Check::at_least(&format!("n{n}_successes"), successes as f64, th.min_successes as f64);
        checks.push(if th.advisory { check.advisory() } else { check });
        per_n.push(json!({"n": n, "successes": successes, "seeds": m.seeds}));
    }
    ctx.artifact("cbo_seeds.csv", |w| {
        writeln!(w, "n,seed,distance_to_target,objective_at_consensus")?;
        for (n, s, e, g) in &rows {
            writeln!(w, "{n},{s},{e},{g}")?;
        }
        Ok(())
    })?;
    Ok((json!({"per_n": per_n}), checks))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EksModel {
    pub dim: usize,
    pub obs_dim: usize,
    /// Forward matrix rows; drawn from a seeded standard gaussian when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward: Option<Vec<Vec<f64>>>,
    /// Observation noise covariance; identity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<Vec<f64>>>,
    /// Prior covariance; identity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<Vec<Vec<f64>>>,
    /// Data; `G·truth + noise` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    pub truth: Vec<f64>,
    pub derivative_free: bool,
    /// Run both modes on a shared stream and record their largest gap.
    pub compare_modes: bool,
}

impl Default for EksModel {
    fn default() -> Self {
        Self {
            dim: 2,
            obs_dim: 2,
            forward: None,
            gamma: None,
            gamma0: None,
            y: None,
            truth: vec![1.0, -1.0],
            derivative_free: true,
            compare_modes: true,
        }
    }
}

fn matrix(rows: &[Vec<f64>], r: usize, c: usize, field: &str) -> std::result::Result<DMatrix<f64>, Violation> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Violation::new(field, format!("must be {r}x{c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn spd(m: &DMatrix<f64>, field: &str) -> Option<Violation> {
    let sym = (m - m.transpose()).norm() <= 1e-12 * m.norm().max(1.0);
    (!sym || m.clone().cholesky().is_none()).then(|| Violation::new(field, "must be symmetric positive definite"))
}

/// `(G, Γ, Γ₀, y)`.
type LinearProblem = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>);

impl EksModel {
    fn resolve(&self, seed: u64) -> std::result::Result<LinearProblem, Violation> {
        let (d, k) = (self.dim, self.obs_dim);
        let g = match &self.forward {
            Some(rows) => matrix(rows, k, d, "model.forward")?,
            None => {
                let mut rng = make_rng(seed, 1);
                DMatrix::from_fn(k, d, |_, _| rng.gaussian())
            }
        };
        let gamma = match &self.gamma {
            Some(rows) => matrix(rows, k, k, "model.gamma")?,
            None => DMatrix::identity(k, k),
        };
        let gamma0 = match &self.gamma0 {
            Some(rows) => matrix(rows, d, d, "model.gamma0")?,
            None => DMatrix::identity(d, d),
        };
        if let Some(v) = spd(&gamma, "model.gamma").or_else(|| spd(&gamma0, "model.gamma0")) {
            return Err(v);
        }
        let y = match &self.y {
            Some(y) if y.len() == k => DVector::from_column_slice(y),
            Some(_) => return Err(Violation::new("model.y", format!("needs {k} entries"))),
            None => {
                if self.truth.len() != d {
                    return Err(Violation::new("model.truth", format!("needs {d} entries")));
                }
                let mut rng = make_rng(seed, 2);
                let noise = DVector::from_fn(k, |_, _| rng.gaussian());
                let root = gamma.clone().cholesky().expect("checked").l();
                &g * DVector::from_column_slice(&self.truth) + root * noise
            }
        };
        Ok((g, gamma, gamma0, y))
    }
}

impl Semantic for EksModel {
    fn violations(&self, cfg: &ExperimentConfig) -> Vec<Violation> {
        if self.dim == 0 || self.obs_dim == 0 {
            return vec![Violation::new("model.dim", "dim and obs_dim must be at least 1")];
        }
        match self.resolve(cfg.seed.unwrap_or(0)) {
            Ok(_) => Vec::new(),
            Err(v) => vec![v],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EksThresholds {
    /// Largest coordinate error of the ensemble mean, in posterior standard
    /// deviations.
    pub mean_err_max: f64,
    /// Relative Frobenius error of the ensemble covariance.
    pub cov_rel_max: f64,
    pub mode_gap_max: f64,
}

impl Default for EksThresholds {
    fn default() -> Self {
        Self {
            mean_err_max: 0.1,
            cov_rel_max: 0.2,
            mode_gap_max: 1e-8,
        }
    }
}

pub(crate) fn run_eks(ctx: &mut Ctx, m: &EksModel, th: &EksThresholds) -> Result<(Value, Vec<Check>)> {
    let t = ctx.time();
    let grid = TimeGrid::new(t.t0, t.t_end, t.dt)?;
    let (g, gamma, gamma0, y) = m.resolve(ctx.seed).map_err(|v| Error::Config(v.to_string()))?;
    let (post_mean, post_cov) = posterior_gaussian_oracle(&g, &gamma, &gamma0, &y)?;
    let root = make_rng(ctx.seed, 0);
    let mut per_n = Vec::new();
    let mut checks = Vec::new();
    for &n in &ctx.n_list.clone() {
        let base = root.substream(n as u64);
        let mut init = base.substream(0);
        let chol0 = gamma0.clone().cholesky().expect("validated").l();
        let e0 = Ensemble::from_fn(n, m.dim, |_, z| {
            let xi = DVector::from_fn(m.dim, |_, _| init.gaussian());
            z.copy_from_slice((&chol0 * xi).as_slice());
        })?;
        let cfg = |derivative_free: bool, steps: usize| EksConfig {
            forward: ForwardMap::Linear(g.clone()),
            gamma: gamma.clone(),
            gamma0: gamma0.clone(),
            y: y.clone(),
            dt: t.dt,
            steps,
            derivative_free,
        };
        let mut rng = base.substream(1);
        let (fin, gap) = if m.compare_modes {
            // Step both modes from a shared stream state.
            let (mut a, mut b) = (e0.clone(), e0.clone());
            let (ca, cb) = (cfg(m.derivative_free, 1), cfg(!m.derivative_free, 1));
            let mut gap = 0.0f64;
            for _ in 0..grid.steps {
                let mut shared = rng.clone();
                a = eks_sample(&ca, &a, &mut rng)?.ensemble;
                b = eks_sample(&cb, &b, &mut shared)?.ensemble;
                let scale = a.states().iter().fold(1.0f64, |s, v| s.max(v.abs()));
                let diff = a
                    .states()
                    .iter()
                    .zip(b.states())
                    .fold(0.0f64, |s, (p, q)| s.max((p - q).abs()));
                gap = gap.max(diff / scale);
            }
            (a, Some(gap))
        } else {
            (
                eks_sample(&cfg(m.derivative_free, grid.steps), &e0, &mut rng)?.ensemble,
                None,
            )
        };
        let (mean, cov) = ensemble_moments(&fin);
        let mean_err = (0..m.dim)
            .map(|i| (mean[i] - post_mean[i]).abs() / post_cov[(i, i)].sqrt())
            .fold(0.0, f64::max);
        let cov_rel = (&cov - &post_cov).norm() / post_cov.norm();
        checks.push(Check::at_most(
            &format!("n{n}_mean_err_in_std"),
            mean_err,
            th.mean_err_max,
        ));
        checks.push(Check::at_most(&format!("n{n}_cov_rel_err"), cov_rel, th.cov_rel_max));
        if let Some(gap) = gap {
            checks.push(Check::at_most(&format!("n{n}_mode_gap"), gap, th.mode_gap_max));
        }
        ctx.artifact(&format!("eks_final_n{n}.csv"), |w| {
            let header: Vec<String> = (0..m.dim).map(|k| format!("x{k}")).collect();
            writeln!(w, "{}", header.join(","))?;
            for p in fin.particles() {
                let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })?;
        per_n.push(json!({
            "n": n,
            "mean": mean.as_slice(),
            "cov": cov.as_slice(),
            "mean_err_in_std": mean_err,
            "cov_rel_err": cov_rel,
            "mode_gap": gap,
        }));
    }
    let metrics = json!({
        "forward": g.transpose().as_slice(),
        "y": y.as_slice(),
        "posterior_mean": post_mean.as_slice(),
        "posterior_cov": post_cov.as_slice(),
        "per_n": per_n,
    });
    Ok((metrics, checks))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmcModel {
    /// Gaussian target in one dimension.
    pub target_mean: f64,
    pub target_var: f64,
    pub bandwidth: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub init_lo: f64,
    pub init_hi: f64,
}

impl Default for CmcModel {
    fn default() -> Self {
        Self {
            target_mean: 0.0,
            target_var: 1.0,
            bandwidth: 0.5,
            sweeps: 2000,
            burn_in: 500,
            init_lo: -5.0,
            init_hi: 5.0,
        }
    }
}

impl Semantic for CmcModel {
    fn violations(&self, _: &ExperimentConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.target_var > 0.0) {
            out.push(Violation::new("model.target_var", "must be positive"));
        }
        if !(self.bandwidth > 0.0) {
            out.push(Violation::new("model.bandwidth", "must be positive"));
        }
        if self.burn_in >= self.sweeps {
            out.push(Violation::new("model.burn_in", "must be smaller than sweeps"));
        }
        if !(self.init_hi > self.init_lo) {
            out.push(Violation::new("model.init_lo", "need init_lo < init_hi"));
        }
        out
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmcThresholds {
    pub mean_abs_max: f64,
    /// Relative error of the pooled variance.
    pub var_rel_max: f64,
}

impl Default for CmcThresholds {
    fn default() -> Self {
        Self {
            mean_abs_max: 0.05,
            var_rel_max: 0.1,
        }
    }
}

pub(crate) fn run_cmc(ctx: &mut Ctx, m: &CmcModel, th: &CmcThresholds) -> Result<(Value, Vec<Check>)> {
    let (mu, var) = (m.target_mean, m.target_var);
    let cfg = CmcConfig::new(
        move |x: &[f64]| -0.5 * (x[0] - mu).powi(2) / var,
        m.bandwidth,
        m.sweeps,
        m.burn_in,
    );
    let root = make_rng(ctx.seed, 0);
    let mut per_n = Vec::new();
    let mut checks = Vec::new();
    for &n in &ctx.n_list.clone() {
        let base = root.substream(n as u64);
        let mut init = base.substream(0);
        let e0 = Ensemble::from_fn(n, 1, |_, z| z[0] = init.uniform_range(m.init_lo, m.init_hi))?;
        let run = cmc_run(&cfg, &e0, &base.substream(1))?;
        ctx.artifact(&format!("cmc_trace_n{n}.csv"), |w| run.write_trace_csv(w))?;
        let mean_err = (run.pooled_mean[0] - mu).abs();
        let var_rel = (run.pooled_var[0] - var).abs() / var;
        checks.push(Check::at_most(&format!("n{n}_mean_abs_err"), mean_err, th.mean_abs_max));
        checks.push(Check::at_most(&format!("n{n}_var_rel_err"), var_rel, th.var_rel_max));
        let post = &run.acceptance[m.burn_in..];
        per_n.push(json!({
            "n": n,
            "pooled_mean": run.pooled_mean[0],
            "pooled_var": run.pooled_var[0],
            "mean_acceptance_after_burn_in": post.iter().sum::<f64>() / post.len().max(1) as f64,
        }));
    }
    Ok((json!({"per_n": per_n}), checks))
}
