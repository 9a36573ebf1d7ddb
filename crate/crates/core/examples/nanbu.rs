//! Nanbu's one-sided collision scheme: cheap, conservative only in mean.

use meanfield::boltzmann::{maxwell_isotropic, nanbu_simulate};
use meanfield::{make_rng, Ensemble};

fn energy(e: &Ensemble) -> f64 {
    e.states().iter().map(|v| v * v).sum::<f64>() / e.n() as f64
}

fn main() -> meanfield::Result<()> {
    let model = maxwell_isotropic(3, 1.0)?;
    let mut rng = make_rng(17, 0);
    let e0 = Ensemble::from_fn(2000, 3, |_, z| {
        z.iter_mut().for_each(|v| *v = rng.uniform_range(-1.7, 1.7))
    })?;
    let (e, stats) = nanbu_simulate(&model, &e0, 0.05, 100, &mut rng)?;
    println!("{} of {} proposals accepted", stats.accepted, stats.proposals);
    println!("energy per particle {:.4} -> {:.4}", energy(&e0), energy(&e));
    Ok(())
}
