//! Bird's DSMC for a spatially inhomogeneous hard-sphere gas in a periodic
//! box: two counter-streaming beams thermalize.

use meanfield::boltzmann::{bird_simulate, hard_sphere_model, CellGrid, Kinetic, RunOptions};
use meanfield::{make_rng, Ensemble, TimeGrid};

fn main() -> meanfield::Result<()> {
    let model = Kinetic::new(hard_sphere_model(6.0, 2)?);
    let grid = CellGrid::periodic_box(vec![0.0; 2], vec![1.0; 2], 0.25)?;
    let mut rng = make_rng(13, 0);
    let e0 = Ensemble::from_fn(4000, 4, |i, z| {
        z[0] = rng.uniform();
        z[1] = rng.uniform();
        z[2] = if i % 2 == 0 { 1.0 } else { -1.0 } + 0.1 * rng.gaussian();
        z[3] = 0.1 * rng.gaussian();
    })?;
    let steps = TimeGrid::new(0.0, 2.0, 0.05)?;
    let opts = RunOptions::counters_only().with_snapshots(vec![0.5, 1.0, 2.0]);
    let run = bird_simulate(&model, &grid, &e0, &steps, &mut rng, &opts)?;
    println!("{} collisions in {} cells", run.log.accepted, grid.num_cells());
    for s in &run.snapshots {
        let vy = s.coordinate(3);
        let var = vy.iter().map(|v| v * v).sum::<f64>() / vy.len() as f64;
        println!("t = {:3.1}  transverse temperature {:.4}", s.time, var);
    }
    Ok(())
}
