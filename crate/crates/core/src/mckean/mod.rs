//! McKean-Vlasov diffusions: explicit Euler–Maruyama simulation, the named
//! model families, and the synchronous-coupling chaos harness.

mod coupling;
mod models;

pub use coupling::{
    ou_reference, simulate_synchronous_coupling, CouplingReport, InitialLaw, OuReference, ReferenceLaw,
};
pub use models::{
    cucker_smale_model, gradient_system_model, kuramoto_model, mean_field_ou, regularized_coulomb_model, CuckerSmale,
    GradientSystem, KernelModel, Kuramoto, MeanFieldOu, Potential, RegularizedCoulomb,
};

use std::io::Write;

use crate::ensemble::{empirical_moments, EmpiricalMeasure, Ensemble, TimeGrid};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Which particle a drift or diffusion is being evaluated for.
///
/// `member` is true when `x` is atom `index` of the measure passed alongside
/// it; models that exclude self-interaction use it to skip that atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Site {
    pub index: usize,
    pub member: bool,
}

impl Site {
    pub fn member(index: usize) -> Self {
        Self { index, member: true }
    }

    pub fn external(index: usize) -> Self {
        Self { index, member: false }
    }
}

/// Parameters of the mean-field Ornstein–Uhlenbeck family
/// `b(x, μ) = −λx − κ(x − m(μ))`, `σ(x, μ) = σ·Id`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuParams {
    pub lambda: f64,
    pub kappa: f64,
    pub sigma: f64,
}

/// Drift `b(x, μ)` and diffusion `σ(x, μ)` of a McKean-Vlasov particle system.
///
/// `field` is called once per time step on the pre-step measure and its result
/// is handed to every drift/diffusion evaluation of that step, so models can
/// cache measure statistics (means, phase averages) instead of re-summing
/// over all atoms for each particle.
pub trait McKeanModel: Sync {
    type Field: Send + Sync;

    fn dim(&self) -> usize;

    fn field(&self, mu: &EmpiricalMeasure<'_>) -> Self::Field;

    fn drift(&self, site: Site, x: &[f64], mu: &EmpiricalMeasure<'_>, field: &Self::Field, out: &mut [f64]);

    /// Writes the `dim × dim` diffusion matrix, row-major.
    fn diffusion(&self, site: Site, x: &[f64], mu: &EmpiricalMeasure<'_>, field: &Self::Field, out: &mut [f64]);

    /// Closed-form membership in the mean-field OU family, if any.
    fn ou_family(&self) -> Option<OuParams> {
        None
    }

    /// True when the drift depends on particle labels (quenched disorder).
    fn labelled(&self) -> bool {
        false
    }
}

/// Scratch buffers for one Euler–Maruyama update.
pub(crate) struct EmScratch {
    drift: Vec<f64>,
    diff: Vec<f64>,
}

impl EmScratch {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            drift: vec![0.0; dim],
            diff: vec![0.0; dim * dim],
        }
    }
}

/// Applies one explicit step to every particle of `states`, all evaluated
/// against `mu` (the pre-step measure). `noise` holds `n · dim` standard
/// gaussians. Writes into `out`; returns the offending particle on failure.
#[allow(clippy::too_many_arguments)]
pub(crate) fn em_update<M: McKeanModel>(
    model: &M,
    states: &[f64],
    mu: &EmpiricalMeasure<'_>,
    field: &M::Field,
    member: bool,
    dt: f64,
    noise: &[f64],
    out: &mut [f64],
    scratch: &mut EmScratch,
) -> std::result::Result<(), usize> {
    let d = model.dim();
    let sq = dt.sqrt();
    for (i, (x, y)) in states.chunks_exact(d).zip(out.chunks_exact_mut(d)).enumerate() {
        let site = Site { index: i, member };
        scratch.drift.iter_mut().for_each(|v| *v = 0.0);
        scratch.diff.iter_mut().for_each(|v| *v = 0.0);
        model.drift(site, x, mu, field, &mut scratch.drift);
        model.diffusion(site, x, mu, field, &mut scratch.diff);
        let xi = &noise[i * d..(i + 1) * d];
        for a in 0..d {
            let mut v = x[a] + scratch.drift[a] * dt;
            let row = &scratch.diff[a * d..(a + 1) * d];
            let mut s = 0.0;
            for b in 0..d {
                s += row[b] * xi[b];
            }
            v += s * sq;
            if !v.is_finite() {
                return Err(i);
            }
            y[a] = v;
        }
    }
    Ok(())
}

/// One explicit Euler–Maruyama step. Every particle sees the same pre-step
/// empirical measure.
pub fn step_em<M: McKeanModel>(model: &M, e: &Ensemble, dt: f64, rng: &mut RngStream) -> Result<Ensemble> {
    let mut out = e.clone();
    step_em_in_place(model, &mut out, dt, rng, 0)?;
    Ok(out)
}

fn step_em_in_place<M: McKeanModel>(
    model: &M,
    e: &mut Ensemble,
    dt: f64,
    rng: &mut RngStream,
    step: usize,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    if model.dim() != e.dim() {
        return Err(Error::InvalidInput(format!(
            "model dim {} != ensemble dim {}",
            model.dim(),
            e.dim()
        )));
    }
    let mut noise = vec![0.0; e.n() * e.dim()];
    rng.fill_gaussian(&mut noise);
    let pre = e.states().to_vec();
    let mu = EmpiricalMeasure::from_slice(&pre, e.dim());
    let field = model.field(&mu);
    let mut scratch = EmScratch::new(e.dim());
    em_update(model, &pre, &mu, &field, true, dt, &noise, e.states_mut(), &mut scratch).map_err(|particle| {
        Error::Step {
            particle,
            time: e.time,
            step,
        }
    })?;
    e.time += dt;
    Ok(())
}

/// Hook invoked on the ensemble at selected grid steps.
pub trait Observer {
    /// Whether to observe at grid index `step` (0 is the initial state).
    fn wants(&self, step: usize, grid: &TimeGrid) -> bool;

    fn observe(&mut self, step: usize, e: &Ensemble) -> Result<()>;
}

/// Runs `grid.steps` Euler–Maruyama steps from `e0`.
pub fn simulate<M: McKeanModel>(
    model: &M,
    e0: &Ensemble,
    grid: &TimeGrid,
    rng: &mut RngStream,
    observers: &mut [&mut dyn Observer],
) -> Result<Ensemble> {
    let mut e = e0.clone();
    e.time = grid.t0;
    for obs in observers.iter_mut() {
        if obs.wants(0, grid) {
            obs.observe(0, &e)?;
        }
    }
    for k in 0..grid.steps {
        step_em_in_place(model, &mut e, grid.step_len(k), rng, k)?;
        e.time = grid.time(k + 1);
        for obs in observers.iter_mut() {
            if obs.wants(k + 1, grid) {
                obs.observe(k + 1, &e)?;
            }
        }
    }
    Ok(e)
}

/// Records coordinate-wise empirical moments every `every` steps.
#[derive(Clone, Debug)]
pub struct MomentTracker {
    pub every: usize,
    pub orders: Vec<u32>,
    /// `(time, moments per order, concatenated)`.
    pub records: Vec<(f64, Vec<f64>)>,
}

impl MomentTracker {
    pub fn new(every: usize, orders: &[u32]) -> Self {
        Self {
            every: every.max(1),
            orders: orders.to_vec(),
            records: Vec::new(),
        }
    }
}

impl Observer for MomentTracker {
    fn wants(&self, step: usize, grid: &TimeGrid) -> bool {
        step.is_multiple_of(self.every) || step == grid.steps
    }

    fn observe(&mut self, _step: usize, e: &Ensemble) -> Result<()> {
        let mut row = Vec::new();
        for &p in &self.orders {
            row.extend(empirical_moments(e, p)?);
        }
        self.records.push((e.time, row));
        Ok(())
    }
}

/// Writes snapshot rows `time,replica,particle,coord0..coordD`.
pub struct SnapshotWriter<W: Write> {
    pub every: usize,
    pub replica: usize,
    writer: W,
    header_done: bool,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(writer: W, every: usize, replica: usize) -> Self {
        Self {
            every: every.max(1),
            replica,
            writer,
            header_done: false,
        }
    }

    /// Snapshot writer that appends to a stream whose header was already
    /// written (e.g. by a previous replica).
    pub fn continuing(writer: W, every: usize, replica: usize) -> Self {
        Self {
            header_done: true,
            ..Self::new(writer, every, replica)
        }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: Write> Observer for SnapshotWriter<W> {
    fn wants(&self, step: usize, grid: &TimeGrid) -> bool {
        step.is_multiple_of(self.every) || step == grid.steps
    }

    fn observe(&mut self, _step: usize, e: &Ensemble) -> Result<()> {
        write_snapshot(&mut self.writer, e, self.replica, !self.header_done)?;
        self.header_done = true;
        Ok(())
    }
}

/// Snapshot CSV rows for one ensemble; writes the header first if asked.
pub fn write_snapshot<W: Write>(w: &mut W, e: &Ensemble, replica: usize, header: bool) -> Result<()> {
    if header {
        write!(w, "time,replica,particle")?;
        for k in 0..e.dim() {
            write!(w, ",coord{k}")?;
        }
        writeln!(w)?;
    }
    for (i, p) in e.particles().enumerate() {
        write!(w, "{},{},{}", e.time, replica, i)?;
        for v in p {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
