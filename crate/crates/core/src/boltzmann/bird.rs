use super::{acceptance, apply_proposal, CollisionModel, CollisionRun, EventLog, RunOptions};
use crate::ensemble::{Ensemble, TimeGrid};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Consecutive rejections in one cell after which the cell is abandoned for
/// the rest of the step (a cell whose pairs all have zero rate would
/// otherwise never advance its counter).
const MAX_REJECTIONS: u64 = 10_000_000;

/// Partition of a periodic box into cubes of side `delta`, or a single
/// cell for spatially homogeneous runs.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    delta: f64,
    counts: Vec<usize>,
    volume: f64,
}

impl CellGrid {
    /// One cell of the given volume; positions are ignored.
    pub fn single(volume: f64) -> Result<Self> {
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cell volume must be positive, got {volume}"
            )));
        }
        Ok(Self {
            lower: Vec::new(),
            upper: Vec::new(),
            delta: volume,
            counts: Vec::new(),
            volume,
        })
    }

    /// Periodic box `[lower, upper)` cut into cubes of side `delta`; each
    /// side length must be a multiple of `delta`.
    pub fn periodic_box(lower: Vec<f64>, upper: Vec<f64>, delta: f64) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput(
                "box corners must be non-empty and of equal length".into(),
            ));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("cell side must be positive, got {delta}")));
        }
        let mut counts = Vec::with_capacity(lower.len());
        for (lo, hi) in lower.iter().zip(&upper) {
            let ratio = (hi - lo) / delta;
            let k = ratio.round();
            if !(k >= 1.0) || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "side [{lo}, {hi}) is not a positive multiple of delta {delta}"
                )));
            }
            counts.push(k as usize);
        }
        let volume = delta.powi(lower.len() as i32);
        Ok(Self {
            lower,
            upper,
            delta,
            counts,
            volume,
        })
    }

    /// Number of leading state coordinates read as a position.
    pub fn position_dims(&self) -> usize {
        self.lower.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn num_cells(&self) -> usize {
        self.counts.iter().product()
    }

    /// Maps a position into the box periodically.
    pub fn wrap(&self, x: &mut [f64]) {
        for (k, xk) in x.iter_mut().take(self.lower.len()).enumerate() {
            let (lo, len) = (self.lower[k], self.upper[k] - self.lower[k]);
            let mut y = (*xk - lo).rem_euclid(len);
            if y >= len {
                y = 0.0;
            }
            *xk = lo + y;
        }
    }

    /// Cell index of an in-box position; `None` outside the box.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (k, &xk) in x.iter().enumerate().take(self.lower.len()) {
            if !(xk >= self.lower[k] && xk < self.upper[k]) {
                return None;
            }
            let c = (((xk - self.lower[k]) / self.delta) as usize).min(self.counts[k] - 1);
            idx = idx * self.counts[k] + c;
        }
        Some(idx)
    }
}

/// Bird's DSMC over a time grid: free flow over each step, then an
/// independent collision loop per cell driven by the cell's time counter.
///
/// The counter advances by `2 N δ^d / (N_G (N_G − 1) λ_ij)` on accepted
/// collisions only; the collision that pushes it past the step end is still
/// applied. Snapshots hold the initial state followed by the states at the
/// grid times listed in `opts.snapshot_times`.
pub fn bird_simulate<M: CollisionModel>(
    model: &M,
    grid: &CellGrid,
    e0: &Ensemble,
    time_grid: &TimeGrid,
    rng: &mut RngStream,
    opts: &RunOptions,
) -> Result<CollisionRun> {
    let n = e0.n();
    let d = model.dim();
    if e0.dim() != d {
        return Err(Error::InvalidInput(format!(
            "ensemble dimension {} does not match model dimension {d}",
            e0.dim()
        )));
    }
    if grid.position_dims() > d {
        return Err(Error::InvalidInput(
            "cell grid has more dimensions than the state".into(),
        ));
    }
    let mut states = e0.states().to_vec();
    let mut log = EventLog::new(opts.log_cap);
    let mut snapshots = vec![e0.clone()];
    let mut pending = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|s| *s > time_grid.t0)
        .peekable();
    let mut buf = (vec![0.0; d], vec![0.0; d]);
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); grid.num_cells()];
    let scale = 2.0 * n as f64 * grid.cell_volume();

    for k in 0..time_grid.steps {
        let (t_k, dt) = (time_grid.time(k), time_grid.step_len(k));
        let t_next = t_k + dt;
        for z in states.chunks_exact_mut(d) {
            if model.has_free_flow() {
                model.free_flow(z, dt);
            }
            grid.wrap(z);
        }
        cells.iter_mut().for_each(Vec::clear);
        for (i, z) in states.chunks_exact(d).enumerate() {
            let c = grid.cell_of(z).ok_or(Error::Step {
                particle: i,
                time: t_next,
                step: k,
            })?;
            cells[c].push(i);
        }
        let first_event = log.events.len();
        for members in &cells {
            let ng = members.len();
            if ng < 2 || !(model.rate_bound() * model.density_bound() > 0.0) {
                continue;
            }
            let pairs = (ng * (ng - 1)) as f64;
            let mut t_c = t_k;
            let mut rejections = 0u64;
            while t_c <= t_next {
                let (a, b) = rng.pair(ng);
                let (i, j) = (members[a], members[b]);
                let theta = model.sample_param(rng);
                let (ratio, lambda) = acceptance(
                    model,
                    &states[i * d..(i + 1) * d],
                    &states[j * d..(j + 1) * d],
                    &theta,
                    t_c,
                )?;
                let accept = rng.uniform() < ratio;
                apply_proposal(
                    model,
                    &mut states,
                    i,
                    j,
                    &theta,
                    accept,
                    t_c,
                    &mut log,
                    opts.log_rejected,
                    &mut buf,
                );
                if accept {
                    t_c += scale / (pairs * lambda);
                    rejections = 0;
                } else {
                    rejections += 1;
                    if rejections >= MAX_REJECTIONS {
                        log::warn!("cell abandoned at t = {t_c} after {rejections} consecutive rejections");
                        break;
                    }
                }
            }
        }
        log.events[first_event..].sort_by(|a, b| a.time.total_cmp(&b.time));
        while let Some(&s) = pending.peek() {
            if s > t_next + 1e-9 * t_next.abs().max(1.0) {
                break;
            }
            snapshots.push(Ensemble::new(states.clone(), d, t_next)?);
            pending.next();
        }
    }
    let ensemble = Ensemble::new(states, d, time_grid.t_end)?;
    Ok(CollisionRun {
        ensemble,
        log,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann::{conservation_report, maxwell_isotropic, Kinetic};
    use crate::rng::make_rng;

    #[test]
    fn grid_maps_each_position_to_one_cell() {
        let g = CellGrid::periodic_box(vec![0.0, -1.0], vec![2.0, 1.0], 0.5).unwrap();
        assert_eq!(g.num_cells(), 16);
        assert_eq!(g.cell_of(&[0.0, -1.0]), Some(0));
        assert_eq!(g.cell_of(&[1.99, 0.99]), Some(15));
        assert_eq!(g.cell_of(&[2.0, 0.0]), None);
        let mut x = [2.25, -1.5];
        g.wrap(&mut x);
        assert_eq!(x, [0.25, 0.5]);
        assert!(CellGrid::periodic_box(vec![0.0], vec![1.0], 0.3).is_err());
        assert!(CellGrid::single(0.0).is_err());
    }

    #[test]
    fn zero_rate_is_pure_transport() {
        let m = Kinetic::new(maxwell_isotropic(2, 0.0).unwrap());
        let g = CellGrid::periodic_box(vec![-100.0; 2], vec![100.0; 2], 10.0).unwrap();
        let mut rng = make_rng(1, 0);
        let e0 = Ensemble::from_fn(20, 4, |_, z| rng.fill_gaussian(z)).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 0.25).unwrap();
        let run = bird_simulate(&m, &g, &e0, &tg, &mut make_rng(1, 1), &RunOptions::default()).unwrap();
        assert_eq!(run.log.proposed, 0);
        for (a, b) in e0.particles().zip(run.ensemble.particles()) {
            assert!((b[0] - (a[0] + a[2])).abs() < 1e-12);
            assert!((b[1] - (a[1] + a[3])).abs() < 1e-12);
        }
    }

    #[test]
    fn two_particle_cell_counter_arithmetic() {
        let m = maxwell_isotropic(2, 1.0).unwrap();
        let e0 = Ensemble::new(vec![1.0, 0.0, -1.0, 0.0], 2, 0.0).unwrap();
        let tg = TimeGrid::new(0.0, 10.0, 10.0).unwrap();
        let run = bird_simulate(
            &m,
            &CellGrid::single(1.0).unwrap(),
            &e0,
            &tg,
            &mut make_rng(2, 0),
            &RunOptions::default(),
        )
        .unwrap();
        assert!((run.log.accepted as f64 - 5.0).abs() <= 3.0 * 5f64.sqrt());
    }

    #[test]
    fn event_times_are_sorted_and_invariants_hold() {
        let m = Kinetic::new(maxwell_isotropic(2, 1.0).unwrap());
        let g = CellGrid::periodic_box(vec![0.0; 2], vec![1.0; 2], 0.5).unwrap();
        let mut rng = make_rng(3, 0);
        let e0 = Ensemble::from_fn(400, 4, |_, z| {
            z[0] = rng.uniform();
            z[1] = rng.uniform();
            rng.fill_gaussian(&mut z[2..]);
        })
        .unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 0.1).unwrap();
        let opts = RunOptions::default().with_snapshots(tg.times());
        let run = bird_simulate(&m, &g, &e0, &tg, &mut make_rng(3, 1), &opts).unwrap();
        assert_eq!(run.snapshots.len(), tg.steps + 1);
        assert!(run.log.events.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(run.log.events.iter().all(|e| e.i < e.j));
        let r = conservation_report(&run.snapshots, &run.log, 2..4);
        assert!(r.momentum_drift < 1e-10 && r.energy_drift < 1e-10, "{r:?}");
    }
}
