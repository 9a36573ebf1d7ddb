//! Synchronous coupling of the mean-field OU particle system with its exact
//! gaussian limit; prints sup-in-time MSE per N and the fitted rate.

use meanfield::make_rng;
use meanfield::mckean::{mean_field_ou, ou_reference, simulate_synchronous_coupling, ReferenceLaw};
use meanfield::metrics::fit_rate;
use meanfield::TimeGrid;

fn main() -> meanfield::Result<()> {
    let model = mean_field_ou(1.0, 1.0, 1.0);
    let reference = ReferenceLaw::from(ou_reference(1.0, 1.0, 1.0, 1.0));
    let grid = TimeGrid::new(0.0, 1.0, 1e-3)?;
    let root = make_rng(2024, 0);

    let mut points = Vec::new();
    for n in [50, 100, 200, 400, 800] {
        let report = simulate_synchronous_coupling(&model, &reference, n, &grid, &root.substream(n as u64), 64)?;
        println!("N = {n:4}  sup MSE = {:.3e}", report.sup_mse);
        points.push((n, report.sup_mse));
    }
    let fit = fit_rate(&points)?;
    println!("slope {:.3}, r2 {:.3}", fit.slope, fit.r2);
    Ok(())
}
