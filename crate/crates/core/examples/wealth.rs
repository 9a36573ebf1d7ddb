//! Binary wealth exchange with independent uniform coefficients: total
//! wealth is conserved in mean only, and inequality grows from equal shares.

use meanfield::boltzmann::{exact_simulate, wealth_model, RunOptions};
use meanfield::{make_rng, Ensemble};

fn main() -> meanfield::Result<()> {
    let model = wealth_model(|r| [r.uniform(), r.uniform(), r.uniform(), r.uniform()]);
    let mut rng = make_rng(19, 0);
    let e0 = Ensemble::from_fn(1000, 1, |_, z| z[0] = 1.0)?;
    let run = exact_simulate(&model, &e0, 5.0, &mut rng, &RunOptions::counters_only())?;
    let mut w = run.ensemble.coordinate(0);
    w.sort_by(f64::total_cmp);
    let total: f64 = w.iter().sum();
    let top: f64 = w[900..].iter().sum();
    println!("mean wealth {:.4}, top decile share {:.3}", total / 1000.0, top / total);
    Ok(())
}
