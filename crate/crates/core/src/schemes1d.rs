//! One-dimensional particle scheme for McKean-Vlasov equations written on
//! the cumulative distribution function, with the viscous Burgers instance.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Interaction kernel `K(x, y)` of the CDF scheme.
#[derive(Clone)]
pub enum Kernel1d {
    Zero,
    Constant(f64),
    /// `H(x − y)` with `H(z) = 1{z ≥ 0}`, so `H(0) = 1`.
    Heaviside,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Kernel1d {
    pub fn custom(k: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Kernel1d::Custom(Arc::new(k))
    }

    /// `(1/N) Σ_j K(yⁱ, yʲ)` for every `i`.
    fn averages(&self, y: &[f64], out: &mut [f64]) {
        let n = y.len() as f64;
        match self {
            Kernel1d::Zero => out.fill(0.0),
            Kernel1d::Constant(c) => out.fill(*c),
            Kernel1d::Heaviside => {
                let mut sorted = y.to_vec();
                sorted.sort_by(f64::total_cmp);
                for (o, yi) in out.iter_mut().zip(y) {
                    *o = sorted.partition_point(|v| v <= yi) as f64 / n;
                }
            }
            Kernel1d::Custom(k) => {
                for (o, yi) in out.iter_mut().zip(y) {
                    *o = y.iter().map(|yj| k(*yi, *yj)).sum::<f64>() / n;
                }
            }
        }
    }
}

type InitialSampler = Arc<dyn Fn(&mut RngStream) -> f64 + Send + Sync>;

/// Particle scheme
/// `Yⁱ ← Yⁱ + (1/N)Σⱼ K1(Yⁱ,Yʲ) Δt + (√Δt/N)Σⱼ K2(Yⁱ,Yʲ) Gⁱ`.
#[derive(Clone)]
pub struct CdfScheme {
    pub k1: Kernel1d,
    pub k2: Kernel1d,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub initial: InitialSampler,
    /// Times at which the empirical CDF is recorded; empty means `t_end`
    /// only. Each is rounded to the nearest step.
    pub checkpoints: Vec<f64>,
}

impl CdfScheme {
    pub fn new(
        k1: Kernel1d,
        k2: Kernel1d,
        n: usize,
        dt: f64,
        t_end: f64,
        initial: impl Fn(&mut RngStream) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            k1,
            k2,
            n,
            dt,
            t_end,
            initial: Arc::new(initial),
            checkpoints: Vec::new(),
        }
    }

    pub fn with_checkpoints(mut self, times: Vec<f64>) -> Self {
        self.checkpoints = times;
        self
    }
}

/// Burgers: `K1(x, y) = H(x − y)`, constant diffusion `σ`.
pub fn burgers_scheme(
    sigma: f64,
    initial: impl Fn(&mut RngStream) -> f64 + Send + Sync + 'static,
    n: usize,
    dt: f64,
    t_end: f64,
) -> CdfScheme {
    CdfScheme::new(Kernel1d::Heaviside, Kernel1d::Constant(sigma), n, dt, t_end, initial)
}

/// Empirical CDF `V^N(x) = (1/N) Σ H(x − Yⁱ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCdf {
    pub time: f64,
    sorted: Vec<f64>,
}

impl StepCdf {
    pub fn new(time: f64, mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { time, sorted: samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|y| *y <= x) as f64 / self.sorted.len() as f64
    }
}

/// Writes CSV rows `time,sorted_sample_0..`.
pub fn write_checkpoints_csv<W: Write>(w: &mut W, cdfs: &[StepCdf]) -> Result<()> {
    let n = cdfs.first().map_or(0, |c| c.sorted.len());
    write!(w, "time")?;
    for i in 0..n {
        write!(w, ",sorted_sample_{i}")?;
    }
    writeln!(w)?;
    for c in cdfs {
        write!(w, "{}", c.time)?;
        for y in &c.sorted {
            write!(w, ",{y}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Runs the scheme and returns the empirical CDF at each checkpoint.
pub fn bossy_talay_run(s: &CdfScheme, rng: &mut RngStream) -> Result<Vec<StepCdf>> {
    if s.n == 0 {
        return Err(Error::InvalidInput("scheme needs at least one particle".into()));
    }
    if !(s.dt > 0.0) || !(s.t_end >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and t_end >= 0, got {} and {}",
            s.dt, s.t_end
        )));
    }
    let steps = (s.t_end / s.dt).round() as usize;
    let mut marks: Vec<usize> = if s.checkpoints.is_empty() {
        vec![steps]
    } else {
        s.checkpoints
            .iter()
            .map(|t| ((t / s.dt).round() as usize).min(steps))
            .collect()
    };
    marks.sort_unstable();
    let mut y: Vec<f64> = (0..s.n).map(|_| (s.initial)(rng)).collect();
    let mut a1 = vec![0.0; s.n];
    let mut a2 = vec![0.0; s.n];
    let sq = s.dt.sqrt();
    let mut out = Vec::with_capacity(marks.len());
    let mut next = 0;
    for k in 0..=steps {
        while next < marks.len() && marks[next] == k {
            out.push(StepCdf::new(k as f64 * s.dt, y.clone()));
            next += 1;
        }
        if k == steps {
            break;
        }
        s.k1.averages(&y, &mut a1);
        s.k2.averages(&y, &mut a2);
        if let Some(i) = a1.iter().chain(&a2).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: k,
                what: format!("kernel average for particle {}", i % s.n),
            });
        }
        for i in 0..s.n {
            y[i] += a1[i] * s.dt + a2[i] * sq * rng.gaussian();
        }
    }
    Ok(out)
}

/// Gaussian kernel density `x ↦ (1/N) Σ φ_ε(x − Yⁱ)`.
#[derive(Clone, Debug)]
pub struct SmoothedDensity {
    samples: Vec<f64>,
    eps: f64,
}

pub fn smoothed_density(samples: &[f64], eps: f64) -> Result<SmoothedDensity> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    Ok(SmoothedDensity {
        samples: samples.to_vec(),
        eps,
    })
}

impl SmoothedDensity {
    pub fn eval(&self, x: f64) -> f64 {
        let c = 1.0 / (self.eps * (2.0 * std::f64::consts::PI).sqrt());
        let s: f64 = self
            .samples
            .iter()
            .map(|y| (-0.5 * ((x - y) / self.eps).powi(2)).exp())
            .sum();
        c * s / self.samples.len() as f64
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Trapezoid approximation of `∫ |V^N − V| dx` over `grid`.
pub fn l1_cdf_error(v: &StepCdf, exact: impl Fn(f64) -> f64, grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        return 0.0;
    }
    let gap = |x: f64| (v.eval(x) - exact(x)).abs();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if gap(lo) > 1e-3 || gap(hi) > 1e-3 {
        log::warn!("grid [{lo}, {hi}] is too narrow: boundary CDF gap exceeds 1e-3");
    }
    let vals: Vec<f64> = grid.iter().map(|x| gap(*x)).collect();
    grid.windows(2)
        .zip(vals.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum()
}

/// `n + 1` equally spaced points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;
    use proptest::prelude::*;

    #[test]
    fn zero_kernels_freeze_particles() {
        let s = CdfScheme::new(Kernel1d::Zero, Kernel1d::Zero, 20, 0.01, 1.0, |r| r.gaussian())
            .with_checkpoints(vec![0.0, 0.5, 1.0]);
        let cdfs = bossy_talay_run(&s, &mut make_rng(1, 0)).unwrap();
        assert_eq!(cdfs.len(), 3);
        assert_eq!(cdfs[0].samples(), cdfs[2].samples());
    }

    #[test]
    fn unit_diffusion_is_a_random_walk() {
        let s = CdfScheme::new(Kernel1d::Zero, Kernel1d::Constant(1.0), 4000, 0.01, 1.0, |_| 0.0);
        let y = bossy_talay_run(&s, &mut make_rng(2, 0)).unwrap().pop().unwrap();
        let n = y.samples().len() as f64;
        let m = y.samples().iter().sum::<f64>() / n;
        let v = y.samples().iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        assert!((v - 1.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn heaviside_self_interaction() {
        let mut out = [0.0; 3];
        Kernel1d::Heaviside.averages(&[2.0, 2.0, 2.0], &mut out);
        assert_eq!(out, [1.0; 3]);
        let mut out = [0.0; 2];
        Kernel1d::Heaviside.averages(&[0.0, 1.0], &mut out);
        assert_eq!(out, [0.5, 1.0]);
    }

    #[test]
    fn heaviside_matches_brute_force() {
        let mut rng = make_rng(3, 0);
        let mut y: Vec<f64> = (0..50).map(|_| (rng.gaussian() * 4.0).round() / 4.0).collect();
        y.push(y[0]);
        let mut fast = vec![0.0; y.len()];
        let mut slow = vec![0.0; y.len()];
        Kernel1d::Heaviside.averages(&y, &mut fast);
        Kernel1d::custom(|a, b| if a - b >= 0.0 { 1.0 } else { 0.0 }).averages(&y, &mut slow);
        assert_eq!(fast, slow);
    }

    #[test]
    fn burgers_single_particle_moves_at_unit_speed() {
        let s = burgers_scheme(0.0, |_| 0.0, 1, 0.1, 2.0);
        let y = bossy_talay_run(&s, &mut make_rng(4, 0)).unwrap().pop().unwrap();
        assert!((y.samples()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn burgers_initial_dirac_is_unit_step() {
        let s = burgers_scheme(1.0, |_| 0.0, 10, 0.1, 1.0).with_checkpoints(vec![0.0]);
        let v = &bossy_talay_run(&s, &mut make_rng(5, 0)).unwrap()[0];
        assert_eq!((v.eval(-1e-12), v.eval(0.0)), (0.0, 1.0));
    }

    #[test]
    fn sorted_burgers_drift_is_rank() {
        let y = [0.3, -1.0, 2.0, 0.1];
        let mut out = [0.0; 4];
        Kernel1d::Heaviside.averages(&y, &mut out);
        let mut pairs: Vec<(f64, f64)> = y.iter().copied().zip(out).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (rank, (_, drift)) in pairs.iter().enumerate() {
            assert_eq!(*drift, (rank as f64 + 1.0) / 4.0);
        }
    }

    #[test]
    fn non_finite_kernel_names_step() {
        let s = CdfScheme::new(Kernel1d::custom(|_, _| f64::NAN), Kernel1d::Zero, 3, 0.1, 1.0, |_| 0.0);
        assert!(matches!(
            bossy_talay_run(&s, &mut make_rng(6, 0)),
            Err(Error::NonFinite { step: 0, .. })
        ));
    }

    #[test]
    fn density_peak_and_mass() {
        let d = smoothed_density(&[0.0], 1.0).unwrap();
        assert!((d.eval(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let d = smoothed_density(&[-1.0, 0.5, 2.0], 0.3).unwrap();
        let g = uniform_grid(-10.0, 10.0, 20_000);
        let mass: f64 = g
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (d.eval(w[0]) + d.eval(w[1])))
            .sum();
        assert!((mass - 1.0).abs() < 1e-3);
        let d = smoothed_density(&[-5.0, 5.0], 0.01).unwrap();
        let left: f64 = uniform_grid(-6.0, -4.0, 4000)
            .windows(2)
            .map(|w| (w[1] - w[0]) * d.eval(w[0]))
            .sum();
        assert!((left - 0.5).abs() < 1e-3);
        assert!(smoothed_density(&[0.0], 0.0).is_err());
    }

    #[test]
    fn l1_error_examples() {
        let g = uniform_grid(-10.0, 10.0, 200_000);
        let step0 = StepCdf::new(0.0, vec![0.0]);
        let step1 = StepCdf::new(0.0, vec![1.0]);
        assert_eq!(l1_cdf_error(&step0, |x| step0.eval(x), &g), 0.0);
        assert!((l1_cdf_error(&step0, |x| step1.eval(x), &g) - 1.0).abs() < 1e-3);
        // 2φ(0) = √(2/π)
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((l1_cdf_error(&step0, normal_cdf, &g) - want).abs() < 1e-3);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.96) - 0.975_002_104_851_78).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn step_cdf_is_monotone_with_lattice_values(xs in proptest::collection::vec(-10.0..10.0f64, 1..40), probes in proptest::collection::vec(-12.0..12.0f64, 2..20)) {
            let v = StepCdf::new(0.0, xs.clone());
            let mut p = probes.clone();
            p.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let mut last = 0.0;
            for x in p {
                let f = v.eval(x);
                prop_assert!(f >= last && (0.0..=1.0).contains(&f));
                prop_assert!(((f * n).round() - f * n).abs() < 1e-9);
                last = f;
            }
        }
    }
}
