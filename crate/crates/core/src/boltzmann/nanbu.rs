use super::{acceptance, CollisionModel};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Proposal and acceptance counts of a Nanbu run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NanbuStats {
    pub proposals: u64,
    pub accepted: u64,
}

/// Nanbu's scheme: per step every particle collides with probability
/// `min(1, Λ M Δt)` against a uniform partner from the pre-step state, and
/// only the particle itself is updated (through `ψ₁`).
pub fn nanbu_simulate<M: CollisionModel>(
    model: &M,
    e0: &Ensemble,
    dt: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<(Ensemble, NanbuStats)> {
    let n = e0.n();
    let d = model.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!("nanbu simulation needs N >= 2, got {n}")));
    }
    if e0.dim() != d {
        return Err(Error::InvalidInput(format!(
            "ensemble dimension {} does not match model dimension {d}",
            e0.dim()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let mut p = model.rate_bound() * model.density_bound() * dt;
    if p > 1.0 {
        log::warn!("collision probability {p} exceeds 1 and is clipped; rates are biased");
        p = 1.0;
    }
    let mut stats = NanbuStats::default();
    let mut prev = e0.states().to_vec();
    let mut next = prev.clone();
    let (mut o1, mut o2) = (vec![0.0; d], vec![0.0; d]);
    let mut t = e0.time;
    for _ in 0..steps {
        if model.has_free_flow() {
            prev.chunks_exact_mut(d).for_each(|z| model.free_flow(z, dt));
        }
        next.copy_from_slice(&prev);
        for i in 0..n {
            if !rng.bernoulli(p) {
                continue;
            }
            let mut j = rng.index(n - 1);
            if j >= i {
                j += 1;
            }
            stats.proposals += 1;
            let (zi, zj) = (&prev[i * d..(i + 1) * d], &prev[j * d..(j + 1) * d]);
            let theta = model.sample_param(rng);
            let (ratio, _) = acceptance(model, zi, zj, &theta, t)?;
            if rng.uniform() < ratio && model.collide(zi, zj, &theta, &mut o1, &mut o2) {
                stats.accepted += 1;
                next[i * d..(i + 1) * d].copy_from_slice(&o1);
            }
        }
        std::mem::swap(&mut prev, &mut next);
        t += dt;
    }
    Ok((Ensemble::new(prev, d, t)?, stats))
}
