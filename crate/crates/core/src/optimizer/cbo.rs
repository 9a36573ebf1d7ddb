use std::io::Write;
use std::sync::Arc;

use crate::ensemble::{log_weighted_mean_from, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::rng::RngStream;

type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Sampler = Arc<dyn Fn(&mut RngStream, &mut [f64]) + Send + Sync>;

/// Consensus-based optimization settings.
#[derive(Clone)]
pub struct CboConfig {
    pub objective: Objective,
    pub dim: usize,
    pub n: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// Width of the smoothed Heaviside factor; 0 keeps the drift always on.
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    /// Initial particle law.
    pub init: Sampler,
}

impl CboConfig {
    /// Defaults: `α = 30`, `λ = 1`, `σ = 0.7`, `ε = 0`, `dt = 0.01`,
    /// 1000 steps, `N = 100`, particles uniform on `[−3, 3]^d`.
    pub fn new(objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, dim: usize) -> Self {
        Self {
            objective: Arc::new(objective),
            dim,
            n: 100,
            alpha: 30.0,
            lambda: 1.0,
            sigma: 0.7,
            eps: 0.0,
            dt: 0.01,
            steps: 1000,
            init: Arc::new(|rng, x| x.iter_mut().for_each(|v| *v = rng.uniform_range(-3.0, 3.0))),
        }
    }

    pub fn init_uniform(mut self, lo: f64, hi: f64) -> Self {
        self.init = Arc::new(move |rng, x| x.iter_mut().for_each(|v| *v = rng.uniform_range(lo, hi)));
        self
    }

    fn check(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} must be positive, got {v}")));
        if !(self.alpha > 0.0) {
            return bad("alpha", self.alpha);
        }
        if !(self.lambda > 0.0) {
            return bad("lambda", self.lambda);
        }
        if !(self.dt > 0.0) {
            return bad("dt", self.dt);
        }
        if !(self.sigma >= 0.0) || !(self.eps >= 0.0) {
            return Err(Error::Config("sigma and eps must be nonnegative".into()));
        }
        if self.n == 0 || self.dim == 0 {
            return Err(Error::Config("n and dim must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of [`cbo_minimize`].
#[derive(Clone, Debug)]
pub struct CboResult {
    /// Final `v[μ]`.
    pub consensus: Vec<f64>,
    pub objective_at_consensus: f64,
    /// Best particle seen at any step.
    pub best: Vec<f64>,
    pub best_value: f64,
    /// `(t, v[μ_t])` per step, starting at `t = 0`.
    pub trajectory: Vec<(f64, Vec<f64>)>,
}

impl CboResult {
    /// CSV rows `time,v0..v{d-1}`.
    pub fn write_trajectory_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.consensus.len();
        write!(w, "time")?;
        for k in 0..d {
            write!(w, ",v{k}")?;
        }
        writeln!(w)?;
        for (t, v) in &self.trajectory {
            write!(w, "{t}")?;
            for x in v {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn smoothed_heaviside(z: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        1.0
    } else {
        0.5 * (1.0 + (z / eps).tanh())
    }
}

/// Euler–Maruyama on
/// `dX = −λ(X − v)H^ε(G(X) − G(v)) dt + √2 σ |X − v| dB`, where `v` is the
/// `exp(−αG)`-weighted mean of the ensemble.
pub fn cbo_minimize(cfg: &CboConfig, rng: &mut RngStream) -> Result<CboResult> {
    cfg.check()?;
    let (n, d) = (cfg.n, cfg.dim);
    let mut x = vec![0.0; n * d];
    for p in x.chunks_exact_mut(d) {
        (cfg.init)(rng, p);
    }
    let g = &cfg.objective;
    let sq = (2.0 * cfg.dt).sqrt() * cfg.sigma;
    let mut best = x[..d].to_vec();
    let mut best_value = f64::INFINITY;
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    let mut values = vec![0.0; n];
    let mut logs = vec![0.0; n];
    let mut noise = vec![0.0; d];
    let mut v = Vec::new();
    for step in 0..=cfg.steps {
        for (i, p) in x.chunks_exact(d).enumerate() {
            let gi = g(p);
            if !gi.is_finite() {
                return Err(Error::NonFinite {
                    step,
                    what: format!("objective at particle {i}"),
                });
            }
            values[i] = gi;
            logs[i] = -cfg.alpha * gi;
            if gi < best_value {
                best_value = gi;
                best.copy_from_slice(p);
            }
        }
        v = log_weighted_mean_from(&EmpiricalMeasure::from_slice(&x, d), &logs)?;
        trajectory.push((step as f64 * cfg.dt, v.clone()));
        if step == cfg.steps {
            break;
        }
        let gv = if cfg.eps > 0.0 { g(&v) } else { 0.0 };
        for (i, p) in x.chunks_exact_mut(d).enumerate() {
            let h = smoothed_heaviside(values[i] - gv, cfg.eps);
            let dist = p.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            rng.fill_gaussian(&mut noise);
            for k in 0..d {
                p[k] += -cfg.lambda * (p[k] - v[k]) * h * cfg.dt + sq * dist * noise[k];
            }
        }
    }
    let objective_at_consensus = g(&v);
    Ok(CboResult {
        consensus: v,
        objective_at_consensus,
        best,
        best_value,
        trajectory,
    })
}

/// `10d + Σ (x_k² − 10 cos 2πx_k)`, global minimum 0 at the origin.
pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
            .sum::<f64>()
}
