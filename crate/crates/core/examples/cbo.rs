//! Consensus-based optimization of a shifted Rastrigin function.

use meanfield::make_rng;
use meanfield::optimizer::{cbo_minimize, rastrigin, CboConfig};

fn main() -> meanfield::Result<()> {
    let target = [1.0, -0.5];
    let mut cfg =
        CboConfig::new(move |x: &[f64]| rastrigin(&[x[0] - target[0], x[1] - target[1]]), 2).init_uniform(-3.0, 3.0);
    cfg.lambda = 3.0;
    cfg.sigma = 1.5;
    cfg.eps = 1e-5;
    for seed in 0..5 {
        let r = cbo_minimize(&cfg, &mut make_rng(seed, 0))?;
        println!(
            "seed {seed}: consensus ({:+.4}, {:+.4}), G = {:.2e}",
            r.consensus[0], r.consensus[1], r.objective_at_consensus
        );
    }
    Ok(())
}
