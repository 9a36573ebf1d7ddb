//! Bossy–Talay CDF scheme: heat equation against its exact solution, and a
//! viscous Burgers solution started from two point masses.

use meanfield::make_rng;
use meanfield::schemes1d::{
    bossy_talay_run, burgers_scheme, l1_cdf_error, normal_cdf, uniform_grid, CdfScheme, Kernel1d,
};

fn main() -> meanfield::Result<()> {
    let grid = uniform_grid(-8.0, 8.0, 16000);
    for n in [100, 400, 1600] {
        let heat = CdfScheme::new(Kernel1d::Zero, Kernel1d::Constant(1.0), n, 1e-3, 1.0, |_| 0.0);
        let v = bossy_talay_run(&heat, &mut make_rng(37, n as u64))?
            .pop()
            .expect("final checkpoint");
        println!(
            "heat N = {n:4}  L1 CDF error {:.4}",
            l1_cdf_error(&v, normal_cdf, &grid)
        );
    }

    let burgers = burgers_scheme(0.5, |r| if r.uniform() < 0.5 { -1.0 } else { 1.0 }, 1000, 1e-3, 1.0)
        .with_checkpoints(vec![0.0, 0.5, 1.0]);
    let cdfs = bossy_talay_run(&burgers, &mut make_rng(37, 0))?;
    for c in &cdfs {
        println!(
            "burgers t = {:.1}  V(-0.5) = {:.3}  V(0) = {:.3}  V(0.5) = {:.3}",
            c.time,
            c.eval(-0.5),
            c.eval(0.0),
            c.eval(0.5)
        );
    }
    Ok(())
}
