use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use super::{em_update, EmScratch, McKeanModel, OuParams};
use crate::ensemble::{EmpiricalMeasure, TimeGrid};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Sampler for one particle state drawn from `f₀`.
pub type InitialLaw = Arc<dyn Fn(&mut RngStream, &mut [f64]) + Send + Sync>;

/// Exact law of the mean-field OU process started from a gaussian:
/// `m′ = −λ m`, `v′ = −2(λ + κ) v + σ²`, coordinate-wise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuReference {
    pub lambda: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub m0: f64,
    pub v0: f64,
}

/// Reference law for `b(x, μ) = −λx − κ(x − m(μ))` with unit noise.
pub fn ou_reference(lambda: f64, kappa: f64, m0: f64, v0: f64) -> OuReference {
    OuReference {
        lambda,
        kappa,
        sigma: 1.0,
        m0,
        v0: v0.max(0.0),
    }
}

impl OuReference {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn mean(&self, t: f64) -> f64 {
        self.m0 * (-self.lambda * t).exp()
    }

    pub fn variance(&self, t: f64) -> f64 {
        let rate = 2.0 * (self.lambda + self.kappa);
        let s2 = self.sigma * self.sigma;
        let v = if rate.abs() < 1e-14 {
            self.v0 + s2 * t
        } else {
            let inf = s2 / rate;
            inf + (self.v0 - inf) * (-rate * t).exp()
        };
        v.max(0.0)
    }

    fn matches(&self, p: &OuParams) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        close(self.lambda, p.lambda) && close(self.kappa, p.kappa) && close(self.sigma, p.sigma)
    }
}

/// Stand-in for the law `f_t` of the nonlinear process.
#[derive(Clone)]
pub enum ReferenceLaw {
    /// Closed-form gaussian law; the model must belong to the OU family.
    Gaussian(OuReference),
    /// A large ensemble of `factor · n` particles, simulated alongside the
    /// coupled pair with an independent stream.
    Surrogate { initial: InitialLaw, factor: usize },
}

impl From<OuReference> for ReferenceLaw {
    fn from(r: OuReference) -> Self {
        ReferenceLaw::Gaussian(r)
    }
}

impl ReferenceLaw {
    pub fn surrogate(initial: InitialLaw, factor: usize) -> Self {
        ReferenceLaw::Surrogate { initial, factor }
    }
}

/// Per-time mean-square distance between the particle system and its
/// synchronously coupled nonlinear copies.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    pub times: Vec<f64>,
    pub mse: Vec<f64>,
    pub sup_mse: f64,
    pub n: usize,
    pub replicas: usize,
}

impl CouplingReport {
    /// MSE at the grid point nearest to `t`.
    pub fn mse_at(&self, t: f64) -> f64 {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.mse[k]
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "time,n,replicas,mse")?;
        for (t, m) in self.times.iter().zip(&self.mse) {
            writeln!(w, "{t},{},{},{m}", self.n, self.replicas)?;
        }
        Ok(())
    }
}

const SURROGATE_TAG: u64 = 0x5355_5252;

/// Evolves `n` interacting particles and `n` nonlinear copies driven by the
/// same gaussian increments, over `replicas` independent replicas.
///
/// Replica `r` uses `rng.substream(r)`; results do not depend on how replicas
/// are scheduled across threads.
pub fn simulate_synchronous_coupling<M: McKeanModel>(
    model: &M,
    reference: &ReferenceLaw,
    n: usize,
    grid: &TimeGrid,
    rng: &RngStream,
    replicas: usize,
) -> Result<CouplingReport> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("coupling needs n >= 2, got {n}")));
    }
    if replicas == 0 {
        return Err(Error::InvalidInput("replicas must be >= 1".into()));
    }
    match reference {
        ReferenceLaw::Gaussian(r) => match model.ou_family() {
            Some(p) if r.matches(&p) => {}
            Some(_) => {
                return Err(Error::UnsupportedReference(
                    "gaussian reference parameters differ from the model's".into(),
                ))
            }
            None => {
                return Err(Error::UnsupportedReference(
                    "gaussian reference requires a mean-field OU model".into(),
                ))
            }
        },
        ReferenceLaw::Surrogate { factor, .. } => {
            if *factor == 0 {
                return Err(Error::InvalidInput("surrogate factor must be >= 1".into()));
            }
            if model.labelled() {
                return Err(Error::UnsupportedReference(
                    "surrogate reference cannot carry per-particle disorder".into(),
                ));
            }
        }
    }

    let per_replica: Vec<Result<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|r| coupled_replica(model, reference, n, grid, rng.substream(r as u64)))
        .collect();

    let mut mse = vec![0.0; grid.steps + 1];
    for rep in per_replica {
        for (acc, v) in mse.iter_mut().zip(rep?) {
            *acc += v;
        }
    }
    mse.iter_mut().for_each(|v| *v /= replicas as f64);
    let sup_mse = mse.iter().copied().fold(0.0, f64::max);
    Ok(CouplingReport {
        times: grid.times(),
        mse,
        sup_mse,
        n,
        replicas,
    })
}

fn coupled_replica<M: McKeanModel>(
    model: &M,
    reference: &ReferenceLaw,
    n: usize,
    grid: &TimeGrid,
    mut rng: RngStream,
) -> Result<Vec<f64>> {
    let d = model.dim();
    let mut x = vec![0.0; n * d];
    let mut surrogate = None;
    match reference {
        ReferenceLaw::Gaussian(r) => {
            let sd = r.v0.sqrt();
            for v in x.iter_mut() {
                *v = r.m0 + sd * rng.gaussian();
            }
        }
        ReferenceLaw::Surrogate { initial, factor } => {
            for p in x.chunks_exact_mut(d) {
                initial(&mut rng, p);
            }
            let mut srng = rng.substream(SURROGATE_TAG);
            let mut s = vec![0.0; factor * n * d];
            for p in s.chunks_exact_mut(d) {
                initial(&mut srng, p);
            }
            surrogate = Some((s, srng));
        }
    }
    let mut xbar = x.clone();
    let mut x_next = vec![0.0; n * d];
    let mut xbar_next = vec![0.0; n * d];
    let mut noise = vec![0.0; n * d];
    let mut scratch = EmScratch::new(d);
    let mut s_next = surrogate.as_ref().map(|(s, _)| vec![0.0; s.len()]);
    let mut s_noise = surrogate.as_ref().map(|(s, _)| vec![0.0; s.len()]);

    let mut mse = Vec::with_capacity(grid.steps + 1);
    mse.push(mean_sq_dist(&x, &xbar, n));
    for k in 0..grid.steps {
        let t = grid.time(k);
        let dt = grid.step_len(k);
        rng.fill_gaussian(&mut noise);

        let mu = EmpiricalMeasure::from_slice(&x, d);
        let field = model.field(&mu);
        em_update(model, &x, &mu, &field, true, dt, &noise, &mut x_next, &mut scratch).map_err(|particle| {
            Error::Step {
                particle,
                time: t,
                step: k,
            }
        })?;

        match (reference, surrogate.as_mut()) {
            (ReferenceLaw::Gaussian(r), _) => {
                let m = r.mean(t);
                let sq = dt.sqrt();
                for ((y, xb), xi) in xbar_next.iter_mut().zip(&xbar).zip(&noise) {
                    let drift = -r.lambda * xb - r.kappa * (xb - m);
                    *y = xb + drift * dt + r.sigma * xi * sq;
                }
            }
            (ReferenceLaw::Surrogate { .. }, Some((s, srng))) => {
                let s_next = s_next.as_mut().expect("surrogate buffers");
                let s_noise = s_noise.as_mut().expect("surrogate buffers");
                let mu_s = EmpiricalMeasure::from_slice(s, d);
                let field_s = model.field(&mu_s);
                em_update(
                    model,
                    &xbar,
                    &mu_s,
                    &field_s,
                    false,
                    dt,
                    &noise,
                    &mut xbar_next,
                    &mut scratch,
                )
                .map_err(|particle| Error::Step {
                    particle,
                    time: t,
                    step: k,
                })?;
                srng.fill_gaussian(s_noise);
                em_update(model, s, &mu_s, &field_s, true, dt, s_noise, s_next, &mut scratch).map_err(|particle| {
                    Error::Step {
                        particle,
                        time: t,
                        step: k,
                    }
                })?;
                std::mem::swap(s, s_next);
            }
            (ReferenceLaw::Surrogate { .. }, None) => unreachable!("surrogate initialized above"),
        }
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut xbar, &mut xbar_next);
        if xbar.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: k,
                what: "nonlinear copy".into(),
            });
        }
        mse.push(mean_sq_dist(&x, &xbar, n));
    }
    Ok(mse)
}

fn mean_sq_dist(a: &[f64], b: &[f64], n: usize) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mckean::{gradient_system_model, kuramoto_model, mean_field_ou, Potential};
    use crate::rng::make_rng;

    #[test]
    fn ou_reference_closed_forms() {
        let r = ou_reference(1.0, 0.0, 1.0, 0.0);
        assert!((r.mean(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let r = ou_reference(0.0, 1.0, 0.0, 0.0);
        assert!((r.variance(50.0) - 0.5).abs() < 1e-12);
        let r = ou_reference(0.0, 0.0, 0.0, 0.0);
        assert!((r.variance(2.0) - 2.0).abs() < 1e-15);
        let r = ou_reference(1.0, 1.0, 0.0, 0.0).with_sigma(2.0f64.sqrt());
        assert!((r.variance(100.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ou_variance_solves_its_ode() {
        let r = ou_reference(0.7, 0.4, 1.0, 2.0);
        let h = 1e-5;
        for &t in &[0.1, 0.5, 2.0] {
            let dv = (r.variance(t + h) - r.variance(t - h)) / (2.0 * h);
            let rhs = -2.0 * (0.7 + 0.4) * r.variance(t) + 1.0;
            assert!((dv - rhs).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_systems_have_zero_error() {
        // kappa = 0: the drift ignores the measure, so both copies coincide
        let model = mean_field_ou(1.0, 0.0, 1.0);
        let reference = ReferenceLaw::from(ou_reference(1.0, 0.0, 1.0, 1.0));
        let grid = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
        let rep = simulate_synchronous_coupling(&model, &reference, 20, &grid, &make_rng(1, 0), 4).unwrap();
        assert_eq!(rep.mse[0], 0.0);
        assert!(rep.sup_mse <= 1e-20);
    }

    #[test]
    fn deterministic_identical_drifts_are_bitwise_equal_with_surrogate() {
        let model = gradient_system_model(Potential::Quadratic(1.0), Potential::Zero, 0.0, 1).unwrap();
        let init: InitialLaw = Arc::new(|r: &mut RngStream, p: &mut [f64]| p[0] = r.gaussian());
        let reference = ReferenceLaw::surrogate(init, 16);
        let grid = TimeGrid::new(0.0, 1.0, 0.05).unwrap();
        let rep = simulate_synchronous_coupling(&model, &reference, 10, &grid, &make_rng(2, 0), 2).unwrap();
        assert!(rep.mse.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_error_is_zero() {
        let model = mean_field_ou(1.0, 1.0, 1.0);
        let reference = ReferenceLaw::from(ou_reference(1.0, 1.0, 0.5, 1.0));
        let grid = TimeGrid::new(0.0, 0.5, 0.01).unwrap();
        let rep = simulate_synchronous_coupling(&model, &reference, 50, &grid, &make_rng(3, 0), 8).unwrap();
        assert_eq!(rep.mse[0], 0.0);
        assert!(rep.mse.iter().all(|v| *v >= 0.0));
        assert!(rep.sup_mse > 0.0);
        assert_eq!(rep.times.len(), grid.steps + 1);
    }

    #[test]
    fn rejects_unsupported_references() {
        let grid = TimeGrid::new(0.0, 0.1, 0.01).unwrap();
        let rng = make_rng(1, 0);
        let quartic = gradient_system_model(Potential::Quadratic(1.0), Potential::Quartic(1.0), 1.0, 1).unwrap();
        let gaussian = ReferenceLaw::from(ou_reference(1.0, 1.0, 0.0, 1.0));
        assert!(matches!(
            simulate_synchronous_coupling(&quartic, &gaussian, 10, &grid, &rng, 1),
            Err(Error::UnsupportedReference(_))
        ));
        let ou = mean_field_ou(2.0, 1.0, 1.0);
        assert!(matches!(
            simulate_synchronous_coupling(&ou, &gaussian, 10, &grid, &rng, 1),
            Err(Error::UnsupportedReference(_))
        ));
        let mut r = make_rng(1, 1);
        let sampler = |r: &mut RngStream| r.gaussian();
        let kur = kuramoto_model(1.0, Some((10, &sampler, &mut r)));
        let init: InitialLaw = Arc::new(|r: &mut RngStream, p: &mut [f64]| p[0] = r.gaussian());
        assert!(matches!(
            simulate_synchronous_coupling(&kur, &ReferenceLaw::surrogate(init, 16), 10, &grid, &rng, 1),
            Err(Error::UnsupportedReference(_))
        ));
        assert!(simulate_synchronous_coupling(&ou, &gaussian, 1, &grid, &rng, 1).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let model = mean_field_ou(1.0, 1.0, 1.0);
        let reference = ReferenceLaw::from(ou_reference(1.0, 1.0, 0.5, 1.0));
        let grid = TimeGrid::new(0.0, 0.2, 0.01).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_synchronous_coupling(&model, &reference, 30, &grid, &make_rng(4, 0), 6).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn report_csv_layout() {
        let rep = CouplingReport {
            times: vec![0.0, 0.5],
            mse: vec![0.0, 0.25],
            sup_mse: 0.25,
            n: 10,
            replicas: 2,
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,n,replicas,mse\n0,10,2,0\n0.5,10,2,0.25\n"
        );
        assert_eq!(rep.mse_at(0.4), 0.25);
    }
}
