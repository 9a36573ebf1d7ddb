//! One-dimensional Wasserstein distances between samples.

use meanfield::make_rng;
use meanfield::metrics::{ks_critical, ks_statistic, wasserstein_1d};
use meanfield::schemes1d::normal_cdf;

fn main() -> meanfield::Result<()> {
    let mut rng = make_rng(41, 0);
    let a: Vec<f64> = (0..5000).map(|_| rng.gaussian()).collect();
    let b: Vec<f64> = (0..5000).map(|_| rng.gaussian()).collect();
    let c: Vec<f64> = b.iter().map(|x| x + 0.3).collect();
    println!("W1(a, b) = {:.4}", wasserstein_1d(&a, &b, 1)?);
    println!("W1(a, b + 0.3) = {:.4}", wasserstein_1d(&a, &c, 1)?);
    println!("W2(a, b + 0.3) = {:.4}", wasserstein_1d(&a, &c, 2)?);
    println!(
        "KS(a, N(0,1)) = {:.4} (critical {:.4})",
        ks_statistic(&a, normal_cdf),
        ks_critical(a.len(), 0.01)
    );
    Ok(())
}
