//! Granular-media gradient system with quadratic confinement and interaction:
//! the coupling error stays bounded uniformly in time.

use meanfield::make_rng;
use meanfield::mckean::{gradient_system_model, ou_reference, simulate_synchronous_coupling, Potential};
use meanfield::TimeGrid;

fn main() -> meanfield::Result<()> {
    let sigma = 2f64.sqrt();
    let model = gradient_system_model(Potential::Quadratic(1.0), Potential::Quadratic(1.0), sigma, 1)?;
    let reference = ou_reference(1.0, 1.0, 1.0, 1.0).with_sigma(sigma).into();
    let grid = TimeGrid::new(0.0, 10.0, 0.01)?;
    let report = simulate_synchronous_coupling(&model, &reference, 200, &grid, &make_rng(7, 0), 128)?;
    for t in [1.0, 2.0, 5.0, 10.0] {
        println!("t = {t:4}  MSE = {:.3e}", report.mse_at(t));
    }
    Ok(())
}
