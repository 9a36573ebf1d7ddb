//! Ensemble Kalman sampler on a linear-gaussian inverse problem, compared
//! against the exact posterior.

use meanfield::optimizer::{eks_sample, ensemble_moments, posterior_gaussian_oracle, EksConfig, ForwardMap};
use meanfield::{make_rng, Ensemble};
use nalgebra::{dmatrix, dvector, DMatrix};

fn main() -> meanfield::Result<()> {
    let g = dmatrix![1.0, 0.5; 0.0, 2.0; 1.0, -1.0];
    let y = dvector![1.0, 0.3, -0.4];
    let gamma = DMatrix::identity(3, 3) * 0.25;
    let gamma0 = DMatrix::identity(2, 2);
    let cfg = EksConfig {
        forward: ForwardMap::Linear(g.clone()),
        gamma: gamma.clone(),
        gamma0: gamma0.clone(),
        y: y.clone(),
        dt: 0.005,
        steps: 2000,
        derivative_free: true,
    };
    let mut rng = make_rng(31, 0);
    let e0 = Ensemble::from_fn(1000, 2, |_, z| rng.fill_gaussian(z))?;
    let run = eks_sample(&cfg, &e0, &mut rng)?;
    let (mean, cov) = ensemble_moments(&run.ensemble);
    let (post_mean, post_cov) = posterior_gaussian_oracle(&g, &gamma, &gamma0, &y)?;
    println!(
        "mean      ensemble {:.4?}  posterior {:.4?}",
        mean.as_slice(),
        post_mean.as_slice()
    );
    println!(
        "cov (col) ensemble {:.4?}  posterior {:.4?}",
        cov.as_slice(),
        post_cov.as_slice()
    );
    Ok(())
}
