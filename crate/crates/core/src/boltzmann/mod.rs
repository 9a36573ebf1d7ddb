//! Parametric Boltzmann collision models and their particle simulation:
//! the exact accept-reject algorithm, Bird's cell-based DSMC and Nanbu's
//! one-sided variant.

mod bird;
mod exact;
mod models;
mod nanbu;

pub use bird::{bird_simulate, CellGrid};
pub use exact::exact_simulate;
pub use models::{
    hard_sphere_model, maxwell_cutoff_model, maxwell_isotropic, post_collision_sigma, wealth_model, Exchange,
    HardSphere, Kinetic, MaxwellCutoff, Scatter, Wealth,
};
pub use nanbu::{nanbu_simulate, NanbuStats};

use std::io::Write;
use std::ops::Range;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::metrics::{ks_critical, ks_statistic};
use crate::rng::RngStream;

/// Semi-parametric cutoff collision model.
///
/// A collision between states `z1, z2` happens at rate `λ(z1, z2) ≤ Λ`; the
/// parameter `θ` is drawn from `q₀ν` and the proposal is accepted with
/// probability `λ q / (Λ M q₀)`, after which the pair becomes
/// `(ψ₁, ψ₂)(z1, z2, θ)`.
pub trait CollisionModel: Sync {
    type Param: Clone + Send;

    fn dim(&self) -> usize;

    /// Coordinates carrying velocity, used for momentum and energy audits.
    fn velocity_range(&self) -> Range<usize> {
        0..self.dim()
    }

    /// Collision rate `λ(z1, z2)`.
    fn rate(&self, z1: &[f64], z2: &[f64]) -> f64;

    /// Global bound `Λ`.
    fn rate_bound(&self) -> f64;

    /// `M` in `q ≤ M q₀`.
    fn density_bound(&self) -> f64 {
        1.0
    }

    /// `q(z1, z2, θ) / q₀(θ)`.
    fn density_ratio(&self, _z1: &[f64], _z2: &[f64], _theta: &Self::Param) -> f64 {
        1.0
    }

    /// Draws `θ ~ q₀ν`.
    fn sample_param(&self, rng: &mut RngStream) -> Self::Param;

    /// Writes `ψ₁(z1, z2, θ)` and `ψ₂(z1, z2, θ)`. Returning `false` rejects
    /// the event without modifying the pair.
    fn collide(&self, z1: &[f64], z2: &[f64], theta: &Self::Param, out1: &mut [f64], out2: &mut [f64]) -> bool;

    /// Flow of the one-particle generator over `dt` (transport, for example).
    fn free_flow(&self, _z: &mut [f64], _dt: f64) {}

    fn has_free_flow(&self) -> bool {
        false
    }

    /// Flat representation of `θ` for event logs.
    fn param_repr(&self, _theta: &Self::Param) -> Vec<f64> {
        Vec::new()
    }
}

/// Acceptance ratio `λ q / (Λ M q₀)`; errors if the model's bounds are wrong.
pub(crate) fn acceptance<M: CollisionModel>(
    model: &M,
    z1: &[f64],
    z2: &[f64],
    theta: &M::Param,
    time: f64,
) -> Result<(f64, f64)> {
    let lambda = model.rate(z1, z2);
    let bound = model.rate_bound() * model.density_bound();
    let weight = lambda * model.density_ratio(z1, z2, theta);
    let ratio = if bound > 0.0 {
        weight / bound
    } else if weight == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    if !(ratio <= 1.0 + 1e-12) {
        return Err(Error::BoundViolation {
            time,
            ratio,
            what: "collision acceptance",
        });
    }
    Ok((ratio, lambda))
}

/// One proposed collision.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub i: usize,
    pub j: usize,
    pub accepted: bool,
    pub theta: Vec<f64>,
    /// Change of `|v_i|² + |v_j|²`.
    pub d_energy: f64,
    /// Change of `v_i + v_j`.
    pub d_momentum: Vec<f64>,
}

/// Audit log of proposed collisions. Beyond `cap` entries only the counters
/// keep running.
#[derive(Clone, Debug)]
pub struct EventLog {
    pub events: Vec<CollisionEvent>,
    pub cap: usize,
    pub proposed: u64,
    pub accepted: u64,
    pub overflowed: bool,
}

pub const DEFAULT_LOG_CAP: usize = 10_000_000;

impl EventLog {
    pub fn new(cap: usize) -> Self {
        Self {
            events: Vec::new(),
            cap,
            proposed: 0,
            accepted: 0,
            overflowed: false,
        }
    }

    pub(crate) fn record(&mut self, event: CollisionEvent) {
        self.proposed += 1;
        if event.accepted {
            self.accepted += 1;
        }
        if self.events.len() < self.cap {
            self.events.push(event);
        } else {
            self.overflowed = true;
        }
    }

    /// CSV rows `time,i,j,accepted,dE,dP0..dPd`.
    pub fn write_csv<W: Write>(&self, w: &mut W, vdim: usize) -> Result<()> {
        write!(w, "time,i,j,accepted,dE")?;
        for k in 0..vdim {
            write!(w, ",dP{k}")?;
        }
        writeln!(w)?;
        for e in &self.events {
            write!(w, "{},{},{},{},{}", e.time, e.i, e.j, u8::from(e.accepted), e.d_energy)?;
            for k in 0..vdim {
                write!(w, ",{}", e.d_momentum.get(k).copied().unwrap_or(0.0))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Options shared by the collision simulators.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub log_cap: usize,
    /// Also log rejected (fictitious) proposals.
    pub log_rejected: bool,
    /// Times at which to snapshot the ensemble (sorted ascending).
    pub snapshot_times: Vec<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            log_cap: DEFAULT_LOG_CAP,
            log_rejected: true,
            snapshot_times: Vec::new(),
        }
    }
}

impl RunOptions {
    pub fn counters_only() -> Self {
        Self {
            log_cap: 0,
            log_rejected: false,
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

/// Result of a collision simulation.
#[derive(Clone, Debug)]
pub struct CollisionRun {
    pub ensemble: Ensemble,
    pub log: EventLog,
    pub snapshots: Vec<Ensemble>,
}

pub(crate) fn pair_invariants(vr: &Range<usize>, z1: &[f64], z2: &[f64]) -> (f64, Vec<f64>) {
    let e = z1[vr.clone()].iter().chain(&z2[vr.clone()]).map(|v| v * v).sum();
    let p = z1[vr.clone()].iter().zip(&z2[vr.clone()]).map(|(a, b)| a + b).collect();
    (e, p)
}

/// Applies an accepted or rejected proposal to particles `i < j` and logs it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn apply_proposal<M: CollisionModel>(
    model: &M,
    states: &mut [f64],
    i: usize,
    j: usize,
    theta: &M::Param,
    accept: bool,
    time: f64,
    log: &mut EventLog,
    log_rejected: bool,
    buf: &mut (Vec<f64>, Vec<f64>),
) {
    let d = model.dim();
    let vr = model.velocity_range();
    let (zi, zj) = (&states[i * d..(i + 1) * d], &states[j * d..(j + 1) * d]);
    let mut accepted = false;
    let mut d_energy = 0.0;
    let mut d_momentum = vec![0.0; vr.len()];
    if accept && model.collide(zi, zj, theta, &mut buf.0, &mut buf.1) {
        accepted = true;
        let (e0, p0) = pair_invariants(&vr, zi, zj);
        let (e1, p1) = pair_invariants(&vr, &buf.0, &buf.1);
        d_energy = e1 - e0;
        for (k, dp) in d_momentum.iter_mut().enumerate() {
            *dp = p1[k] - p0[k];
        }
        states[i * d..(i + 1) * d].copy_from_slice(&buf.0);
        states[j * d..(j + 1) * d].copy_from_slice(&buf.1);
    }
    if accepted || log_rejected || log.cap == 0 {
        log.record(CollisionEvent {
            time,
            i,
            j,
            accepted,
            theta: if log.events.len() < log.cap {
                model.param_repr(theta)
            } else {
                Vec::new()
            },
            d_energy,
            d_momentum,
        });
    } else {
        log.proposed += 1;
    }
}

/// Momentum and energy drift over a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationReport {
    /// `max_t |P_t − P_0| / Σ|vⁱ_0|`.
    pub momentum_drift: f64,
    /// `max_t |E_t − E_0| / E_0`.
    pub energy_drift: f64,
    /// Largest per-event `|dE|` relative to the pair energy scale of the run.
    pub max_event_energy: f64,
    pub max_event_momentum: f64,
    pub events: usize,
}

/// Drift table from snapshots (first = initial state) and the event log.
pub fn conservation_report(snapshots: &[Ensemble], log: &EventLog, velocity: Range<usize>) -> ConservationReport {
    let totals = |e: &Ensemble| -> (Vec<f64>, f64, f64) {
        let mut p = vec![0.0; velocity.len()];
        let mut energy = 0.0;
        let mut l1 = 0.0;
        for z in e.particles() {
            let v = &z[velocity.clone()];
            for (pk, vk) in p.iter_mut().zip(v) {
                *pk += vk;
            }
            let s: f64 = v.iter().map(|x| x * x).sum();
            energy += s;
            l1 += s.sqrt();
        }
        (p, energy, l1)
    };
    let mut report = ConservationReport {
        momentum_drift: 0.0,
        energy_drift: 0.0,
        max_event_energy: 0.0,
        max_event_momentum: 0.0,
        events: log.events.len(),
    };
    let Some(first) = snapshots.first() else {
        return report;
    };
    let (p0, e0, l1) = totals(first);
    let pscale = if l1 > 0.0 { l1 } else { 1.0 };
    let escale = if e0 > 0.0 { e0 } else { 1.0 };
    for s in &snapshots[1..] {
        let (p, e, _) = totals(s);
        let dp = p.iter().zip(&p0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        report.momentum_drift = report.momentum_drift.max(dp / pscale);
        report.energy_drift = report.energy_drift.max((e - e0).abs() / escale);
    }
    let pair_e = 2.0 * escale / first.n() as f64;
    let pair_p = 2.0 * pscale / first.n() as f64;
    for ev in &log.events {
        report.max_event_energy = report.max_event_energy.max(ev.d_energy.abs() / pair_e);
        let dp = ev.d_momentum.iter().map(|v| v * v).sum::<f64>().sqrt();
        report.max_event_momentum = report.max_event_momentum.max(dp / pair_p);
    }
    report
}

/// Best-effort probe of a model's declared structure on random gaussian
/// states: symmetry of `λ`, `λ ≤ Λ`, `q/q₀ ≤ M`, and a two-sample KS test
/// (level 0.001, 1000 draws per side, first velocity coordinate) of
/// `(ψ₁, ψ₂)(z1, z2, ·)#ν` against `(ψ₂, ψ₁)(z2, z1, ·)#ν`.
pub fn probe_collision_model<M: CollisionModel>(model: &M, rng: &mut RngStream) -> Result<()> {
    let d = model.dim();
    let lam_bound = model.rate_bound();
    let m_bound = model.density_bound();
    let mut z1 = vec![0.0; d];
    let mut z2 = vec![0.0; d];
    for _ in 0..200 {
        rng.fill_gaussian(&mut z1);
        rng.fill_gaussian(&mut z2);
        let a = model.rate(&z1, &z2);
        let b = model.rate(&z2, &z1);
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(Error::ModelSpec(format!("rate is not symmetric: {a} vs {b}")));
        }
        if a > lam_bound * (1.0 + 1e-12) || a < 0.0 {
            return Err(Error::ModelSpec(format!("rate {a} outside [0, {lam_bound}]")));
        }
        let theta = model.sample_param(rng);
        let q = model.density_ratio(&z1, &z2, &theta);
        if q > m_bound * (1.0 + 1e-12) || q < 0.0 {
            return Err(Error::ModelSpec(format!("density ratio {q} outside [0, {m_bound}]")));
        }
    }
    let k = model.velocity_range().start;
    for _ in 0..3 {
        rng.fill_gaussian(&mut z1);
        rng.fill_gaussian(&mut z2);
        let mut fwd = Vec::with_capacity(1000);
        let mut bwd = Vec::with_capacity(1000);
        let (mut o1, mut o2) = (vec![0.0; d], vec![0.0; d]);
        while fwd.len() < 1000 {
            let t = model.sample_param(rng);
            if model.collide(&z1, &z2, &t, &mut o1, &mut o2) {
                fwd.push(o1[k]);
            }
        }
        while bwd.len() < 1000 {
            let t = model.sample_param(rng);
            if model.collide(&z2, &z1, &t, &mut o1, &mut o2) {
                bwd.push(o2[k]);
            }
        }
        let stat = two_sample_ks(&fwd, &bwd);
        // two-sample critical value with effective size n/2
        let crit = ks_critical(500, 0.001);
        if stat > crit {
            return Err(Error::ModelSpec(format!(
                "post-collision law is not symmetric (KS {stat:.4} > {crit:.4})"
            )));
        }
    }
    Ok(())
}

fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut sb = b.to_vec();
    sb.sort_by(f64::total_cmp);
    let n = sb.len() as f64;
    let cdf_b = |x: f64| sb.partition_point(|v| *v <= x) as f64 / n;
    let ab = ks_statistic(a, cdf_b);
    let mut sa = a.to_vec();
    sa.sort_by(f64::total_cmp);
    let m = sa.len() as f64;
    let cdf_a = |x: f64| sa.partition_point(|v| *v <= x) as f64 / m;
    ab.max(ks_statistic(b, cdf_a))
}
