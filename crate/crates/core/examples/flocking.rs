//! Noisy Cucker–Smale flock in the plane; velocity spread shrinks as the
//! flock aligns, and moments are recorded along the way.

use meanfield::make_rng;
use meanfield::mckean::{cucker_smale_model, simulate, MomentTracker};
use meanfield::{Ensemble, TimeGrid};

fn main() -> meanfield::Result<()> {
    let model = cucker_smale_model(0.5, 0.05, 2)?;
    let mut rng = make_rng(5, 0);
    let e0 = Ensemble::from_fn(300, 4, |_, z| rng.fill_gaussian(z))?;
    let grid = TimeGrid::new(0.0, 10.0, 0.01)?;
    let mut moments = MomentTracker::new(200, &[2]);
    simulate(&model, &e0, &grid, &mut rng, &mut [&mut moments])?;
    // Second moments of (x1, x2, v1, v2).
    for (t, m) in &moments.records {
        println!("t = {t:5.2}  E|v1|^2 = {:.4}  E|v2|^2 = {:.4}", m[2], m[3]);
    }
    Ok(())
}
