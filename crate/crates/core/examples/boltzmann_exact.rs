//! Exact accept-reject simulation of Maxwell molecules with an angular
//! cutoff; audits momentum and energy from snapshots and the event log.

use meanfield::boltzmann::{conservation_report, exact_simulate, maxwell_cutoff_model, CollisionModel, RunOptions};
use meanfield::metrics::excess_kurtosis;
use meanfield::{make_rng, Ensemble};

fn main() -> meanfield::Result<()> {
    // Angular density sin²θ on [0, π].
    let model = maxwell_cutoff_model(|t: f64| t.sin().powi(2), 3)?;
    let mut rng = make_rng(9, 0);
    let e0 = Ensemble::from_fn(1000, 3, |_, z| {
        z.iter_mut().for_each(|v| *v = rng.uniform_range(-1.7, 1.7))
    })?;
    let opts = RunOptions::default().with_snapshots((1..=10).map(|k| k as f64).collect());
    let run = exact_simulate(&model, &e0, 10.0, &mut rng, &opts)?;

    let report = conservation_report(&run.snapshots, &run.log, model.velocity_range());
    println!("accepted {} of {} proposals", run.log.accepted, run.log.proposed);
    println!(
        "momentum drift {:.2e}, energy drift {:.2e}",
        report.momentum_drift, report.energy_drift
    );
    for s in &run.snapshots {
        println!(
            "t = {:4.1}  excess kurtosis = {:+.3}",
            s.time,
            excess_kurtosis(&s.coordinate(0))
        );
    }
    Ok(())
}
