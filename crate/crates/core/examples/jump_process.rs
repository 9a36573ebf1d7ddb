//! Mean-field jump process by Poisson thinning: particles far from the
//! ensemble mean jump more often, resampling near another particle.

use meanfield::jump::{simulate_jump, FnJumpModel};
use meanfield::{make_rng, Ensemble};

fn main() -> meanfield::Result<()> {
    let model = FnJumpModel::new(
        1,
        1.0,
        |x, mu| {
            let m = mu.mean()[0];
            1.0 - (-(x[0] - m).powi(2)).exp()
        },
        |_, mu, rng, out| {
            let j = rng.index(mu.n());
            out[0] = mu.atom(j)[0] + 0.1 * rng.gaussian();
        },
    );
    let mut rng = make_rng(23, 0);
    let e0 = Ensemble::from_fn(500, 1, |_, z| z[0] = rng.uniform_range(-3.0, 3.0))?;
    let (e, stats) = simulate_jump(&model, &e0, 5.0, &mut rng)?;
    let spread = |e: &Ensemble| e.measure().covariance()[0].sqrt();
    println!("{} clock rings, {} jumps", stats.rings, stats.jumps);
    println!("spread {:.3} -> {:.3}", spread(&e0), spread(&e));
    Ok(())
}
