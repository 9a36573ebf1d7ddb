//! Noisy Kuramoto oscillators on both sides of the synchronization threshold.

use meanfield::make_rng;
use meanfield::mckean::{kuramoto_model, simulate};
use meanfield::metrics::kuramoto_order_parameter;
use meanfield::{Ensemble, TimeGrid};

fn main() -> meanfield::Result<()> {
    let grid = TimeGrid::new(0.0, 20.0, 0.01)?;
    for (k, concentrated) in [(0.2, false), (0.8, true), (1.5, true), (2.0, true)] {
        let mut rng = make_rng(3, (k * 10.0) as u64);
        let e0 = Ensemble::from_fn(500, 1, |_, z| {
            z[0] = if concentrated {
                0.1 * rng.gaussian()
            } else {
                rng.uniform_range(0.0, std::f64::consts::TAU)
            }
        })?;
        let e = simulate(&kuramoto_model(k, None), &e0, &grid, &mut rng, &mut [])?;
        println!("K = {k:3}  r_T = {:.3}", kuramoto_order_parameter(e.states()));
    }
    Ok(())
}
