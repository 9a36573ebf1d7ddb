//! Mean-field jump processes simulated by Poisson thinning, and the
//! collective Metropolis–Hastings sampler whose proposal is the kernel
//! smoothing of the current ensemble.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::ensemble::{EmpiricalMeasure, Ensemble};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Jump generator `L_μ φ(x) = λ(x, μ) ∫ (φ(y) − φ(x)) P_μ(x, dy)` with
/// `λ ≤ rate_bound`.
pub trait JumpModel: Sync {
    fn dim(&self) -> usize;

    fn rate(&self, x: &[f64], mu: &EmpiricalMeasure<'_>) -> f64;

    fn rate_bound(&self) -> f64;

    /// Draws the post-jump state from `P_μ(x, ·)` into `out`.
    fn jump(&self, x: &[f64], mu: &EmpiricalMeasure<'_>, rng: &mut RngStream, out: &mut [f64]);
}

type RateFn = Arc<dyn Fn(&[f64], &EmpiricalMeasure<'_>) -> f64 + Send + Sync>;
type JumpFn = Arc<dyn Fn(&[f64], &EmpiricalMeasure<'_>, &mut RngStream, &mut [f64]) + Send + Sync>;

/// Closure-backed [`JumpModel`].
#[derive(Clone)]
pub struct FnJumpModel {
    dim: usize,
    bound: f64,
    rate: RateFn,
    jump: JumpFn,
}

impl FnJumpModel {
    pub fn new(
        dim: usize,
        rate_bound: f64,
        rate: impl Fn(&[f64], &EmpiricalMeasure<'_>) -> f64 + Send + Sync + 'static,
        jump: impl Fn(&[f64], &EmpiricalMeasure<'_>, &mut RngStream, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            bound: rate_bound,
            rate: Arc::new(rate),
            jump: Arc::new(jump),
        }
    }
}

impl JumpModel for FnJumpModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rate(&self, x: &[f64], mu: &EmpiricalMeasure<'_>) -> f64 {
        (self.rate)(x, mu)
    }

    fn rate_bound(&self) -> f64 {
        self.bound
    }

    fn jump(&self, x: &[f64], mu: &EmpiricalMeasure<'_>, rng: &mut RngStream, out: &mut [f64]) {
        (self.jump)(x, mu, rng, out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JumpStats {
    pub rings: u64,
    pub jumps: u64,
}

struct Clock {
    time: f64,
    particle: usize,
}

impl PartialEq for Clock {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Clock {}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Clock {
    // reversed: BinaryHeap is a max-heap and we pop the earliest ring
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.particle.cmp(&self.particle))
    }
}

/// Simulates the jump process on `[t0, t0 + horizon]`.
///
/// Every particle carries an `Exp(rate_bound)` clock; at a ring the jump is
/// kept with probability `rate / rate_bound`, evaluated against the current
/// empirical measure.
pub fn simulate_jump<M: JumpModel>(
    model: &M,
    e0: &Ensemble,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<(Ensemble, JumpStats)> {
    let d = model.dim();
    if e0.dim() != d {
        return Err(Error::InvalidInput(format!(
            "ensemble dimension {} does not match model dimension {d}",
            e0.dim()
        )));
    }
    let bound = model.rate_bound();
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(Error::InvalidInput(format!("rate bound must be finite, got {bound}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "horizon must be finite and nonnegative, got {horizon}"
        )));
    }
    let n = e0.n();
    let t0 = e0.time;
    let t_end = t0 + horizon;
    let mut states = e0.states().to_vec();
    let mut stats = JumpStats::default();
    if bound == 0.0 {
        return Ok((Ensemble::new(states, d, t_end)?, stats));
    }
    let mut queue: BinaryHeap<Clock> = (0..n)
        .map(|particle| Clock {
            time: t0 + rng.exponential(bound),
            particle,
        })
        .collect();
    let mut out = vec![0.0; d];
    while let Some(Clock { time, particle }) = queue.pop() {
        if time > t_end {
            break;
        }
        stats.rings += 1;
        let mu = EmpiricalMeasure::from_slice(&states, d);
        let x = &states[particle * d..(particle + 1) * d];
        let rate = model.rate(x, &mu);
        if !(rate <= bound * (1.0 + 1e-12)) || rate < 0.0 {
            return Err(Error::BoundViolation {
                time,
                ratio: rate / bound,
                what: "jump rate",
            });
        }
        if rng.uniform() * bound < rate {
            model.jump(x, &mu, rng, &mut out);
            states[particle * d..(particle + 1) * d].copy_from_slice(&out);
            stats.jumps += 1;
        }
        queue.push(Clock {
            time: time + rng.exponential(bound),
            particle,
        });
    }
    Ok((Ensemble::new(states, d, t_end)?, stats))
}

type LogDensity = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Collective Metropolis–Hastings with gaussian proposal kernel `K_h`.
#[derive(Clone)]
pub struct CmcConfig {
    pub log_target: LogDensity,
    pub bandwidth: f64,
    pub sweeps: usize,
    pub burn_in: usize,
}

impl CmcConfig {
    pub fn new(
        log_target: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        bandwidth: f64,
        sweeps: usize,
        burn_in: usize,
    ) -> Self {
        Self {
            log_target: Arc::new(log_target),
            bandwidth,
            sweeps,
            burn_in,
        }
    }
}

/// Output of [`cmc_run`].
#[derive(Clone, Debug)]
pub struct CmcRun {
    pub ensemble: Ensemble,
    /// Accepted fraction per sweep.
    pub acceptance: Vec<f64>,
    /// Per-coordinate mean and variance pooled over all particles of all
    /// post-burn-in sweeps.
    pub pooled_mean: Vec<f64>,
    pub pooled_var: Vec<f64>,
}

impl CmcRun {
    /// CSV rows `sweep,accept_fraction`.
    pub fn write_trace_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "sweep,accept_fraction")?;
        for (s, a) in self.acceptance.iter().enumerate() {
            writeln!(w, "{s},{a}")?;
        }
        Ok(())
    }
}

/// `log Θ_μ(y) = log (1/N) Σ_j K_h(y − xʲ)`, gaussian `K_h`.
pub fn log_mixture_density(mu: &EmpiricalMeasure<'_>, h: f64, y: &[f64]) -> f64 {
    let d = mu.dim() as f64;
    let inv = -0.5 / (h * h);
    let mut m = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(mu.n());
    for a in mu.atoms() {
        let r2: f64 = a.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        let t = inv * r2;
        m = m.max(t);
        terms.push(t);
    }
    let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    m + s.ln() - (mu.n() as f64).ln() - 0.5 * d * (2.0 * std::f64::consts::PI * h * h).ln()
}

/// Runs synchronous CMC sweeps: every particle proposes `y = xʲ + hξ` with
/// `j` uniform, and all acceptances are computed against the pre-sweep
/// ensemble. Particle `i` in sweep `s` draws from its own substream, so the
/// result does not depend on the thread count.
pub fn cmc_run(cfg: &CmcConfig, e0: &Ensemble, rng: &RngStream) -> Result<CmcRun> {
    let h = cfg.bandwidth;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    if cfg.burn_in > cfg.sweeps {
        return Err(Error::InvalidInput(format!(
            "burn-in {} exceeds sweep count {}",
            cfg.burn_in, cfg.sweeps
        )));
    }
    let (n, d) = (e0.n(), e0.dim());
    let mut log_pi: Vec<f64> = e0.particles().map(|x| (cfg.log_target)(x)).collect();
    if let Some(i) = log_pi.iter().position(|v| !(*v > f64::NEG_INFINITY) || v.is_nan()) {
        return Err(Error::InvalidInput(format!(
            "target log-density is not finite at initial particle {i}"
        )));
    }
    let mut states = e0.states().to_vec();
    let mut acceptance = Vec::with_capacity(cfg.sweeps);
    let mut sum = vec![0.0; d];
    let mut sum2 = vec![0.0; d];
    let mut pooled = 0usize;
    for sweep in 0..cfg.sweeps {
        let sweep_rng = rng.substream(sweep as u64);
        let mu = EmpiricalMeasure::from_slice(&states, d);
        let moves: Vec<Option<(Vec<f64>, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = sweep_rng.substream(i as u64);
                let j = r.index(n);
                let mut y = mu.atom(j).to_vec();
                for yk in y.iter_mut() {
                    *yk += h * r.gaussian();
                }
                let lp_y = (cfg.log_target)(&y);
                if !(lp_y > f64::NEG_INFINITY) || lp_y.is_nan() {
                    return None;
                }
                let x = mu.atom(i);
                let log_alpha = lp_y - log_pi[i] + log_mixture_density(&mu, h, x) - log_mixture_density(&mu, h, &y);
                (r.uniform().ln() < log_alpha).then_some((y, lp_y))
            })
            .collect();
        let mut accepted = 0usize;
        for (i, m) in moves.into_iter().enumerate() {
            if let Some((y, lp)) = m {
                states[i * d..(i + 1) * d].copy_from_slice(&y);
                log_pi[i] = lp;
                accepted += 1;
            }
        }
        acceptance.push(accepted as f64 / n as f64);
        if sweep + 1 > cfg.burn_in {
            for x in states.chunks_exact(d) {
                for k in 0..d {
                    sum[k] += x[k];
                    sum2[k] += x[k] * x[k];
                }
            }
            pooled += n;
        }
    }
    let (pooled_mean, pooled_var) = if pooled > 0 {
        let p = pooled as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / p).collect();
        let var = sum2.iter().zip(&mean).map(|(s2, m)| s2 / p - m * m).collect();
        (mean, var)
    } else {
        (vec![f64::NAN; d], vec![f64::NAN; d])
    };
    Ok(CmcRun {
        ensemble: Ensemble::new(states, d, e0.time + cfg.sweeps as f64)?,
        acceptance,
        pooled_mean,
        pooled_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;

    fn gaussian_ensemble(n: usize, seed: u64) -> Ensemble {
        let mut rng = make_rng(seed, 77);
        Ensemble::from_fn(n, 1, |_, z| rng.fill_gaussian(z)).unwrap()
    }

    #[test]
    fn zero_rate_is_identity() {
        let m = FnJumpModel::new(1, 0.0, |_, _| 0.0, |_, _, _, o| o[0] = 0.0);
        let e0 = gaussian_ensemble(50, 1);
        let (e, s) = simulate_jump(&m, &e0, 3.0, &mut make_rng(1, 0)).unwrap();
        assert_eq!(e.states(), e0.states());
        assert_eq!(s.jumps, 0);
    }

    #[test]
    fn survival_fraction_is_exponential() {
        // jumps send particles to a value they could not otherwise hold
        let m = FnJumpModel::new(1, 1.0, |_, _| 1.0, |_, _, _, o| o[0] = f64::MAX);
        let n = 2000;
        let e0 = gaussian_ensemble(n, 2);
        let (e, _) = simulate_jump(&m, &e0, 3.0, &mut make_rng(2, 0)).unwrap();
        let alive = e.coordinate(0).iter().filter(|x| **x != f64::MAX).count() as f64 / n as f64;
        let p = (-3.0f64).exp();
        assert!((alive - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{alive}");
    }

    #[test]
    fn identity_jumps_leave_states_unchanged() {
        let m = FnJumpModel::new(1, 2.0, |_, _| 1.5, |x, _, _, o| o.copy_from_slice(x));
        let e0 = gaussian_ensemble(30, 3);
        let (e, s) = simulate_jump(&m, &e0, 2.0, &mut make_rng(3, 0)).unwrap();
        assert_eq!(e.states(), e0.states());
        assert!(s.jumps > 0);
    }

    #[test]
    fn thinned_count_is_independent_of_bound() {
        let n = 100;
        let t = 5.0;
        let r = 0.5;
        let mean = r * n as f64 * t;
        for bound in [0.5, 1.0, 4.0] {
            let m = FnJumpModel::new(1, bound, move |_, _| r, |x, _, _, o| o.copy_from_slice(x));
            let (_, s) = simulate_jump(&m, &gaussian_ensemble(n, 4), t, &mut make_rng(4, bound.to_bits())).unwrap();
            assert!(
                (s.jumps as f64 - mean).abs() <= 3.0 * mean.sqrt(),
                "bound {bound}: {s:?}"
            );
        }
    }

    #[test]
    fn rate_above_bound_is_reported() {
        let m = FnJumpModel::new(1, 1.0, |_, _| 2.0, |x, _, _, o| o.copy_from_slice(x));
        let err = simulate_jump(&m, &gaussian_ensemble(5, 5), 1.0, &mut make_rng(5, 0)).unwrap_err();
        assert!(matches!(err, Error::BoundViolation { .. }));
    }

    #[test]
    fn uniform_target_with_wide_kernel_accepts_everything_in_box() {
        // a single atom makes the mixture symmetric, so α = 1 inside the box
        let cfg = CmcConfig::new(|x| if x[0].abs() <= 1e6 { 0.0 } else { f64::NEG_INFINITY }, 1.0, 50, 0);
        let e0 = Ensemble::from_scalars(&[0.3]).unwrap();
        let run = cmc_run(&cfg, &e0, &make_rng(6, 0)).unwrap();
        assert!(run.acceptance.iter().all(|a| *a == 1.0));
    }

    #[test]
    fn shifted_target_gives_identical_decisions() {
        let a = CmcConfig::new(|x| -0.5 * x[0] * x[0], 0.5, 20, 0);
        let b = CmcConfig::new(|x| -0.5 * x[0] * x[0] + 3.0, 0.5, 20, 0);
        let e0 = gaussian_ensemble(40, 7);
        let ra = cmc_run(&a, &e0, &make_rng(7, 0)).unwrap();
        let rb = cmc_run(&b, &e0, &make_rng(7, 0)).unwrap();
        assert_eq!(ra.acceptance, rb.acceptance);
        assert_eq!(ra.ensemble.states(), rb.ensemble.states());
    }

    #[test]
    fn single_particle_stays_finite() {
        let cfg = CmcConfig::new(|x| -0.5 * x[0] * x[0], 0.5, 200, 100);
        let e0 = Ensemble::from_scalars(&[1.0]).unwrap();
        let run = cmc_run(&cfg, &e0, &make_rng(8, 0)).unwrap();
        assert!(run.ensemble.is_finite());
        assert!(run.pooled_mean[0].is_finite());
    }

    #[test]
    fn infinite_initial_density_is_an_error() {
        let cfg = CmcConfig::new(|x| if x[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY }, 0.5, 1, 0);
        let e0 = Ensemble::from_scalars(&[1.0, -1.0]).unwrap();
        assert!(cmc_run(&cfg, &e0, &make_rng(9, 0)).is_err());
    }

    #[test]
    fn mixture_density_of_one_atom_is_gaussian() {
        let states = [0.0];
        let mu = EmpiricalMeasure::from_slice(&states, 1);
        let v = log_mixture_density(&mu, 2.0, &[1.0]);
        let want = -0.125 - (2.0 * std::f64::consts::PI * 4.0f64).ln() / 2.0;
        assert!((v - want).abs() < 1e-14);
    }

    #[test]
    fn trace_csv_layout() {
        let run = CmcRun {
            ensemble: Ensemble::from_scalars(&[0.0]).unwrap(),
            acceptance: vec![0.5, 0.25],
            pooled_mean: vec![0.0],
            pooled_var: vec![1.0],
        };
        let mut buf = Vec::new();
        run.write_trace_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "sweep,accept_fraction\n0,0.5\n1,0.25\n"
        );
    }
}
