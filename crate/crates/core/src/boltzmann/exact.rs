use super::{acceptance, apply_proposal, CollisionModel, CollisionRun, EventLog, RunOptions};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Exact simulation on `[t0, t0 + horizon]` with a global exponential clock
/// of rate `Λ M (N − 1) / 2`.
///
/// Free flow is applied lazily per particle, so it is exact whenever the
/// model's flow is. Snapshots hold the initial state followed by the states
/// at `opts.snapshot_times` (absolute times inside the horizon).
pub fn exact_simulate<M: CollisionModel>(
    model: &M,
    e0: &Ensemble,
    horizon: f64,
    rng: &mut RngStream,
    opts: &RunOptions,
) -> Result<CollisionRun> {
    let n = e0.n();
    let d = model.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!("exact simulation needs N >= 2, got {n}")));
    }
    if e0.dim() != d {
        return Err(Error::InvalidInput(format!(
            "ensemble dimension {} does not match model dimension {d}",
            e0.dim()
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let bound = model.rate_bound() * model.density_bound();
    if !bound.is_finite() || bound < 0.0 {
        return Err(Error::InvalidInput(format!("rate bound must be finite, got {bound}")));
    }
    let t0 = e0.time;
    let t_end = t0 + horizon;
    let clock = bound * (n as f64 - 1.0) / 2.0;
    let flows = model.has_free_flow();

    let mut states = e0.states().to_vec();
    let mut last = vec![t0; n];
    let mut log = EventLog::new(opts.log_cap);
    let mut snapshots = vec![e0.clone()];
    let mut pending = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|s| *s > t0 && *s <= t_end)
        .peekable();
    let mut buf = (vec![0.0; d], vec![0.0; d]);

    let flow_all = |states: &mut [f64], last: &mut [f64], t: f64| {
        if flows {
            for (i, z) in states.chunks_exact_mut(d).enumerate() {
                model.free_flow(z, t - last[i]);
                last[i] = t;
            }
        }
    };

    let mut t = t0;
    loop {
        let next = if clock > 0.0 {
            t + rng.exponential(clock)
        } else {
            f64::INFINITY
        };
        while let Some(&s) = pending.peek() {
            if s > next {
                break;
            }
            flow_all(&mut states, &mut last, s);
            snapshots.push(Ensemble::new(states.clone(), d, s)?);
            pending.next();
        }
        if next > t_end {
            break;
        }
        t = next;
        let (i, j) = rng.pair(n);
        if flows {
            for p in [i, j] {
                model.free_flow(&mut states[p * d..(p + 1) * d], t - last[p]);
                last[p] = t;
            }
        }
        let theta = model.sample_param(rng);
        let (ratio, _) = acceptance(
            model,
            &states[i * d..(i + 1) * d],
            &states[j * d..(j + 1) * d],
            &theta,
            t,
        )?;
        let accept = rng.uniform() < ratio;
        apply_proposal(
            model,
            &mut states,
            i,
            j,
            &theta,
            accept,
            t,
            &mut log,
            opts.log_rejected,
            &mut buf,
        );
    }
    flow_all(&mut states, &mut last, t_end);
    let ensemble = Ensemble::new(states, d, t_end)?;
    Ok(CollisionRun {
        ensemble,
        log,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann::{conservation_report, maxwell_isotropic, Kinetic};
    use crate::metrics::{ks_critical, ks_statistic};
    use crate::rng::make_rng;

    fn gaussian_ensemble(n: usize, d: usize, seed: u64) -> Ensemble {
        let mut rng = make_rng(seed, 99);
        Ensemble::from_fn(n, d, |_, z| rng.fill_gaussian(z)).unwrap()
    }

    #[test]
    fn zero_rate_is_free_flow() {
        let m = Kinetic::new(maxwell_isotropic(2, 0.0).unwrap());
        let e0 = gaussian_ensemble(10, 4, 1);
        let run = exact_simulate(&m, &e0, 2.0, &mut make_rng(1, 0), &RunOptions::default()).unwrap();
        assert_eq!(run.log.proposed, 0);
        for (a, b) in e0.particles().zip(run.ensemble.particles()) {
            assert_eq!(b[0], a[0] + 2.0 * a[2]);
            assert_eq!(b[1], a[1] + 2.0 * a[3]);
            assert_eq!(&b[2..], &a[2..]);
        }
    }

    #[test]
    fn accepted_event_count_is_poisson() {
        let m = maxwell_isotropic(2, 1.0).unwrap();
        let e0 = gaussian_ensemble(100, 2, 2);
        let run = exact_simulate(&m, &e0, 1.0, &mut make_rng(2, 0), &RunOptions::default()).unwrap();
        let mean = 99.0 / 2.0;
        assert!((run.log.accepted as f64 - mean).abs() <= 3.0 * mean.sqrt());
    }

    #[test]
    fn inter_event_times_are_exponential() {
        let m = maxwell_isotropic(3, 0.5).unwrap();
        let n = 50;
        let e0 = gaussian_ensemble(n, 3, 3);
        let rate = 0.5 * (n as f64 - 1.0) / 2.0;
        let horizon = 10_000.5 / rate;
        let run = exact_simulate(&m, &e0, horizon, &mut make_rng(3, 0), &RunOptions::default()).unwrap();
        let times: Vec<f64> = run.log.events.iter().map(|e| e.time).collect();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).take(10_000).collect();
        assert!(gaps.len() > 9_000);
        assert!(gaps.iter().all(|g| *g >= 0.0));
        let ks = ks_statistic(&gaps, |x| 1.0 - (-rate * x).exp());
        assert!(ks < ks_critical(gaps.len(), 0.01), "ks {ks}");
    }

    #[test]
    fn maxwell_run_conserves_invariants() {
        let m = maxwell_isotropic(3, 1.0).unwrap();
        let e0 = gaussian_ensemble(200, 3, 4);
        let opts = RunOptions::default().with_snapshots(vec![0.5, 1.0, 1.5, 2.0]);
        let run = exact_simulate(&m, &e0, 2.0, &mut make_rng(4, 0), &opts).unwrap();
        assert_eq!(run.snapshots.len(), 5);
        let r = conservation_report(&run.snapshots, &run.log, 0..3);
        assert!(r.momentum_drift <= 1e-8 && r.energy_drift <= 1e-8, "{r:?}");
        assert!(r.max_event_energy <= 1e-12 * 10.0);
    }

    #[test]
    fn zero_event_run_has_zero_drift() {
        let m = maxwell_isotropic(2, 0.0).unwrap();
        let e0 = gaussian_ensemble(20, 2, 5);
        let opts = RunOptions::default().with_snapshots(vec![1.0]);
        let run = exact_simulate(&m, &e0, 1.0, &mut make_rng(5, 0), &opts).unwrap();
        let r = conservation_report(&run.snapshots, &run.log, 0..2);
        assert_eq!((r.momentum_drift, r.energy_drift), (0.0, 0.0));
    }

    #[test]
    fn rejects_single_particle_and_bad_bounds() {
        let m = maxwell_isotropic(2, 1.0).unwrap();
        let e = gaussian_ensemble(1, 2, 6);
        assert!(exact_simulate(&m, &e, 1.0, &mut make_rng(6, 0), &RunOptions::default()).is_err());

        struct Liar;
        impl CollisionModel for Liar {
            type Param = ();
            fn dim(&self) -> usize {
                1
            }
            fn rate(&self, _: &[f64], _: &[f64]) -> f64 {
                2.0
            }
            fn rate_bound(&self) -> f64 {
                1.0
            }
            fn sample_param(&self, _: &mut RngStream) {}
            fn collide(&self, a: &[f64], b: &[f64], _: &(), o1: &mut [f64], o2: &mut [f64]) -> bool {
                o1.copy_from_slice(a);
                o2.copy_from_slice(b);
                true
            }
        }
        let e = gaussian_ensemble(10, 1, 7);
        let err = exact_simulate(&Liar, &e, 1.0, &mut make_rng(7, 0), &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BoundViolation { .. }));
    }

    #[test]
    fn log_cap_downgrades_to_counters() {
        let m = maxwell_isotropic(2, 1.0).unwrap();
        let e0 = gaussian_ensemble(50, 2, 8);
        let opts = RunOptions {
            log_cap: 10,
            ..RunOptions::default()
        };
        let run = exact_simulate(&m, &e0, 2.0, &mut make_rng(8, 0), &opts).unwrap();
        assert_eq!(run.log.events.len(), 10);
        assert!(run.log.overflowed && run.log.proposed > 10);
    }
}
