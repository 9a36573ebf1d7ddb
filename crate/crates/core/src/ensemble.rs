//! Particle ensembles, empirical measures and time grids.

use crate::error::{Error, Result};

/// State of `n` particles in dimension `dim` at one time instant.
///
/// Storage is particle-major: the `dim` coordinates of particle `i` are
/// `states[i * dim..(i + 1) * dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    states: Vec<f64>,
    n: usize,
    dim: usize,
    pub time: f64,
}

impl Ensemble {
    pub fn new(states: Vec<f64>, dim: usize, time: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("ensemble dimension must be >= 1".into()));
        }
        if states.is_empty() || !states.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "state length {} is not a positive multiple of dim {}",
                states.len(),
                dim
            )));
        }
        if let Some(k) = states.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate {} of particle {}",
                k % dim,
                k / dim
            )));
        }
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidInput(format!("invalid ensemble time {time}")));
        }
        let n = states.len() / dim;
        Ok(Self { states, n, dim, time })
    }

    /// One-dimensional ensemble from scalar positions.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.to_vec(), 1, 0.0)
    }

    pub fn from_fn(n: usize, dim: usize, mut f: impl FnMut(usize, &mut [f64])) -> Result<Self> {
        let mut states = vec![0.0; n * dim];
        if dim > 0 {
            for (i, p) in states.chunks_exact_mut(dim).enumerate() {
                f(i, p);
            }
        }
        Self::new(states, dim, 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [f64] {
        &mut self.states
    }

    pub fn into_states(self) -> Vec<f64> {
        self.states
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particle_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.dim)
    }

    /// Values of coordinate `k` across particles.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.particles().map(|p| p[k]).collect()
    }

    pub fn measure(&self) -> EmpiricalMeasure<'_> {
        EmpiricalMeasure {
            states: &self.states,
            n: self.n,
            dim: self.dim,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(|v| v.is_finite())
    }
}

/// Non-owning view of `(1/N) Σ δ_{x^i}`.
#[derive(Clone, Copy, Debug)]
pub struct EmpiricalMeasure<'a> {
    states: &'a [f64],
    n: usize,
    dim: usize,
}

impl<'a> EmpiricalMeasure<'a> {
    /// View over raw particle-major storage. `states.len()` must be a multiple
    /// of `dim`.
    pub fn from_slice(states: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && states.len().is_multiple_of(dim));
        Self {
            states,
            n: states.len() / dim,
            dim,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &'a [f64] {
        self.states
    }

    pub fn atom(&self, j: usize) -> &'a [f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn atoms(&self) -> std::slice::ChunksExact<'a, f64> {
        self.states.chunks_exact(self.dim)
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.atoms() {
            for (mk, pk) in m.iter_mut().zip(p) {
                *mk += pk;
            }
        }
        let w = self.weight();
        m.iter_mut().for_each(|v| *v *= w);
        m
    }

    /// Covariance with 1/N normalization, row-major `dim × dim`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for p in self.atoms() {
            for a in 0..d {
                let da = p[a] - m[a];
                for b in a..d {
                    c[a * d + b] += da * (p[b] - m[b]);
                }
            }
        }
        let w = self.weight();
        for a in 0..d {
            for b in a..d {
                c[a * d + b] *= w;
                c[b * d + a] = c[a * d + b];
            }
        }
        c
    }
}

/// `K⋆μ(x) = (1/N) Σ_j K(x, x^j)`.
///
/// `kernel` writes its `out_dim` outputs into the provided buffer.
pub fn kernel_convolve<K>(mu: &EmpiricalMeasure<'_>, kernel: K, out_dim: usize, x: &[f64]) -> Result<Vec<f64>>
where
    K: Fn(&[f64], &[f64], &mut [f64]),
{
    let mut acc = vec![0.0; out_dim];
    let mut buf = vec![0.0; out_dim];
    for (j, y) in mu.atoms().enumerate() {
        buf.iter_mut().for_each(|v| *v = 0.0);
        kernel(x, y, &mut buf);
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteKernel { index: j });
        }
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let w = mu.weight();
    acc.iter_mut().for_each(|v| *v *= w);
    Ok(acc)
}

/// `Σ w(x^i) x^i / Σ w(x^i)` for nonnegative weights.
pub fn weighted_mean<W>(mu: &EmpiricalMeasure<'_>, w: W) -> Result<Vec<f64>>
where
    W: Fn(&[f64]) -> f64,
{
    let weights: Vec<f64> = mu.atoms().map(&w).collect();
    if weights.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(combine(mu, &weights, total))
}

/// Weighted mean with weights `exp(log_w(x))`, evaluated after subtracting the
/// largest log-weight so that the dominant particle has weight exactly 1.
pub fn log_weighted_mean<L>(mu: &EmpiricalMeasure<'_>, log_w: L) -> Result<Vec<f64>>
where
    L: Fn(&[f64]) -> f64,
{
    let logs: Vec<f64> = mu.atoms().map(&log_w).collect();
    log_weighted_mean_from(mu, &logs)
}

/// Same as [`log_weighted_mean`] with precomputed log-weights.
pub fn log_weighted_mean_from(mu: &EmpiricalMeasure<'_>, logs: &[f64]) -> Result<Vec<f64>> {
    if logs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::DegenerateWeights);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(combine(mu, &weights, total))
}

fn combine(mu: &EmpiricalMeasure<'_>, weights: &[f64], total: f64) -> Vec<f64> {
    let mut out = vec![0.0; mu.dim()];
    for (p, w) in mu.atoms().zip(weights) {
        for (o, pk) in out.iter_mut().zip(p) {
            *o += w * pk;
        }
    }
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Coordinate-wise `(1/N) Σ (x^i_k)^p`.
pub fn empirical_moments(e: &Ensemble, p: u32) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::InvalidInput("moment order must be >= 1".into()));
    }
    let mut m = vec![0.0; e.dim()];
    for x in e.particles() {
        for (mk, xk) in m.iter_mut().zip(x) {
            *mk += xk.powi(p as i32);
        }
    }
    let w = 1.0 / e.n() as f64;
    m.iter_mut().for_each(|v| *v *= w);
    Ok(m)
}

/// Uniform discretization of `[t0, t_end]`.
///
/// The number of steps is the smallest integer covering the interval; when
/// `dt` does not divide the interval the last step is shortened to land on
/// `t_end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && dt.is_finite()) {
            return Err(Error::InvalidInput("time grid values must be finite".into()));
        }
        if t0 >= t_end {
            return Err(Error::InvalidInput(format!("t0 = {t0} must be < t_end = {t_end}")));
        }
        if dt <= 0.0 || dt > t_end - t0 {
            return Err(Error::InvalidInput(format!("dt = {dt} must lie in (0, t_end - t0]")));
        }
        let ratio = (t_end - t0) / dt;
        let steps = (ratio - 1e-9 * ratio.max(1.0)).ceil().max(1.0) as usize;
        Ok(Self { t0, t_end, dt, steps })
    }

    /// Time at the start of step `k` (`k == steps` gives `t_end`).
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.t_end
        } else {
            self.t0 + k as f64 * self.dt
        }
    }

    /// Duration of step `k`.
    pub fn step_len(&self, k: usize) -> f64 {
        self.time(k + 1) - self.time(k)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt).round();
        (k.max(0.0) as usize).min(self.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ensemble_rejects_bad_input() {
        assert!(Ensemble::new(vec![], 1, 0.0).is_err());
        assert!(Ensemble::new(vec![1.0, 2.0, 3.0], 2, 0.0).is_err());
        assert!(Ensemble::new(vec![1.0, f64::NAN], 1, 0.0).is_err());
        assert!(Ensemble::new(vec![1.0], 0, 0.0).is_err());
        let e = Ensemble::new(vec![1.0, 2.0, 3.0, 4.0], 2, 0.0).unwrap();
        assert_eq!((e.n(), e.dim()), (2, 2));
        assert_eq!(e.particle(1), &[3.0, 4.0]);
    }

    #[test]
    fn convolve_zero_kernel() {
        let e = Ensemble::from_scalars(&[1.0, 5.0]).unwrap();
        let v = kernel_convolve(&e.measure(), |_, _, o| o[0] = 0.0, 1, &[0.0]).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn convolve_identity_kernel_is_mean() {
        let e = Ensemble::from_scalars(&[1.0, 3.0]).unwrap();
        let v = kernel_convolve(&e.measure(), |_, y, o| o[0] = y[0], 1, &[0.0]).unwrap();
        assert_eq!(v, vec![2.0]);
    }

    #[test]
    fn convolve_difference_kernel() {
        let e = Ensemble::from_scalars(&[1.0, 2.0, 3.0]).unwrap();
        let v = kernel_convolve(&e.measure(), |x, y, o| o[0] = x[0] - y[0], 1, &[0.0]).unwrap();
        // brute force: -(1 + 2 + 3) / 3
        assert!((v[0] - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn convolve_reports_offending_index() {
        let e = Ensemble::from_scalars(&[1.0, 0.0, 3.0]).unwrap();
        let err = kernel_convolve(&e.measure(), |_, y, o| o[0] = 1.0 / y[0], 1, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteKernel { index: 1 }));
    }

    #[test]
    fn weighted_mean_cases() {
        let e = Ensemble::from_scalars(&[0.0, 2.0]).unwrap();
        assert_eq!(weighted_mean(&e.measure(), |_| 1.0).unwrap(), vec![1.0]);

        let e = Ensemble::from_scalars(&[0.0, 10.0]).unwrap();
        let alpha = 100.0;
        let v = log_weighted_mean(&e.measure(), |x| -alpha * x[0] * x[0]).unwrap();
        // weights 1 and exp(-10^4): the second underflows to 0
        assert!(v[0].abs() < 1e-6);

        let e = Ensemble::from_scalars(&[5.0]).unwrap();
        assert_eq!(weighted_mean(&e.measure(), |_| 3.0).unwrap(), vec![5.0]);
    }

    #[test]
    fn weighted_mean_degenerate() {
        let e = Ensemble::from_scalars(&[0.0, 2.0]).unwrap();
        assert!(matches!(
            weighted_mean(&e.measure(), |_| 0.0),
            Err(Error::DegenerateWeights)
        ));
        assert!(matches!(
            weighted_mean(&e.measure(), |_| f64::NAN),
            Err(Error::DegenerateWeights)
        ));
        assert!(matches!(
            log_weighted_mean(&e.measure(), |_| f64::NEG_INFINITY),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn log_weighted_mean_survives_huge_scores() {
        // plain exponentials underflow for every particle here
        let e = Ensemble::from_scalars(&[1.0, 2.0, 3.0]).unwrap();
        let v = log_weighted_mean(&e.measure(), |x| -1e6 - x[0]).unwrap();
        let w: Vec<f64> = [0.0, -1.0, -2.0].iter().map(|l: &f64| l.exp()).collect();
        let expect = (w[0] * 1.0 + w[1] * 2.0 + w[2] * 3.0) / w.iter().sum::<f64>();
        assert!((v[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn moments() {
        let e = Ensemble::from_scalars(&[-1.0, 1.0]).unwrap();
        assert_eq!(empirical_moments(&e, 2).unwrap(), vec![1.0]);
        assert_eq!(empirical_moments(&e, 1).unwrap(), vec![0.0]);
        let e = Ensemble::from_scalars(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(empirical_moments(&e, 3).unwrap(), vec![12.0]);
        assert!(empirical_moments(&e, 0).is_err());
    }

    #[test]
    fn covariance_matches_definition() {
        let e = Ensemble::new(vec![0.0, 0.0, 2.0, 4.0], 2, 0.0).unwrap();
        let c = e.measure().covariance();
        assert_eq!(c, vec![1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn time_grid() {
        assert!(TimeGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 2.0).is_err());
        let g = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        assert_eq!(g.steps, 1000);
        assert_eq!(g.time(1000), 1.0);
        let g = TimeGrid::new(0.0, 1.0, 0.4).unwrap();
        assert_eq!(g.steps, 3);
        assert!((g.step_len(2) - 0.2).abs() < 1e-12);
        assert_eq!(g.times().len(), 4);
    }

    proptest! {
        #[test]
        fn unit_kernel_has_unit_mass(xs in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let e = Ensemble::from_scalars(&xs).unwrap();
            let v = kernel_convolve(&e.measure(), |_, _, o| o[0] = 1.0, 1, &[0.0]).unwrap();
            prop_assert!((v[0] - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn weighted_mean_scale_invariant(
            xs in prop::collection::vec(-10f64..10.0, 1..40),
            c in 1e-3f64..1e3,
        ) {
            let e = Ensemble::from_scalars(&xs).unwrap();
            let w = |x: &[f64]| (-(x[0] - 1.0).powi(2)).exp() + 0.1;
            let a = weighted_mean(&e.measure(), w).unwrap()[0];
            let b = weighted_mean(&e.measure(), |x| c * w(x)).unwrap()[0];
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn grid_covers_interval(t_end in 0.01f64..10.0, frac in 0.001f64..1.0) {
            let dt = t_end * frac;
            let g = TimeGrid::new(0.0, t_end, dt).unwrap();
            prop_assert!(g.steps as f64 * dt >= t_end - 1e-9 * t_end);
            prop_assert!((g.steps as f64 - 1.0) * dt < t_end);
        }
    }
}
