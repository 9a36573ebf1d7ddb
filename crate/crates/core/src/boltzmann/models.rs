use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use super::CollisionModel;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `v′ = (v+v*)/2 + |v−v*|σ/2`, `v*′ = (v+v*)/2 − |v−v*|σ/2`.
pub fn post_collision_sigma(v: &[f64], v_star: &[f64], sigma: &[f64], out: &mut [f64], out_star: &mut [f64]) {
    let r = v.iter().zip(v_star).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    for k in 0..v.len() {
        let c = 0.5 * (v[k] + v_star[k]);
        let h = 0.5 * r * sigma[k];
        out[k] = c + h;
        out_star[k] = c - h;
    }
}

/// Scattering parameter of the velocity models.
#[derive(Clone, Debug, PartialEq)]
pub enum Scatter {
    /// Absolute post-collision direction `σ`.
    Direction(Vec<f64>),
    /// Deflection from the relative-velocity axis plus a unit vector in the
    /// orthogonal complement (a sign in d = 2).
    Deflection { cos_theta: f64, omega: Vec<f64> },
}

fn uniform_sphere(rng: &mut RngStream, d: usize) -> Vec<f64> {
    loop {
        let mut s = vec![0.0; d];
        rng.fill_gaussian(&mut s);
        let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            s.iter_mut().for_each(|x| *x /= n);
            return s;
        }
    }
}

/// Orthonormal basis of `u⊥` for a unit `u`. Coordinate axes are fed to
/// Gram–Schmidt from least to most aligned with `u`, ties by index, and the
/// most aligned one is dropped.
fn orthonormal_frame(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()).then(a.cmp(&b)));
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for &a in axes.iter().take(d - 1) {
        let mut e = vec![0.0; d];
        e[a] = 1.0;
        for b in std::iter::once(u).chain(frame.iter().map(|f| f.as_slice())) {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        e.iter_mut().for_each(|x| *x /= n);
        frame.push(e);
    }
    frame
}

fn scatter_direction(v: &[f64], v_star: &[f64], theta: &Scatter) -> Option<Vec<f64>> {
    match theta {
        Scatter::Direction(s) => Some(s.clone()),
        Scatter::Deflection { cos_theta, omega } => {
            let d = v.len();
            let mut u: Vec<f64> = v.iter().zip(v_star).map(|(a, b)| a - b).collect();
            let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r == 0.0 {
                return None;
            }
            u.iter_mut().for_each(|x| *x /= r);
            let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
            let frame = orthonormal_frame(&u);
            let mut s: Vec<f64> = u.iter().map(|x| cos_theta * x).collect();
            for (e, w) in frame.iter().zip(omega) {
                for k in 0..d {
                    s[k] += sin_theta * w * e[k];
                }
            }
            Some(s)
        }
    }
}

fn collide_velocities(v: &[f64], v_star: &[f64], theta: &Scatter, out1: &mut [f64], out2: &mut [f64]) {
    match scatter_direction(v, v_star, theta) {
        Some(s) => post_collision_sigma(v, v_star, &s, out1, out2),
        None => {
            out1.copy_from_slice(v);
            out2.copy_from_slice(v_star);
        }
    }
}

fn scatter_repr(theta: &Scatter) -> Vec<f64> {
    match theta {
        Scatter::Direction(s) => s.clone(),
        Scatter::Deflection { cos_theta, omega } => std::iter::once(*cos_theta).chain(omega.iter().copied()).collect(),
    }
}

#[derive(Clone, Debug)]
enum AngleLaw {
    Isotropic,
    /// Piecewise-linear CDF of the deflection angle on a uniform grid of [0, π].
    Tabulated(Vec<f64>),
}

const ANGLE_CELLS: usize = 4096;

/// Maxwell molecules with Grad's cutoff: constant rate, deflection law given
/// by the angular cross-section.
#[derive(Clone, Debug)]
pub struct MaxwellCutoff {
    dim: usize,
    rate: f64,
    law: AngleLaw,
}

/// Maxwell model with angular density `sigma_density` on `[0, π]`; the rate
/// is its total mass.
pub fn maxwell_cutoff_model(sigma_density: impl Fn(f64) -> f64, dim: usize) -> Result<MaxwellCutoff> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!(
            "maxwell model needs dimension >= 2, got {dim}"
        )));
    }
    let h = std::f64::consts::PI / ANGLE_CELLS as f64;
    let f: Vec<f64> = (0..=ANGLE_CELLS).map(|k| sigma_density(k as f64 * h)).collect();
    if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(
            "angular density must be finite and nonnegative".into(),
        ));
    }
    let mut cdf = vec![0.0; ANGLE_CELLS + 1];
    for k in 1..=ANGLE_CELLS {
        cdf[k] = cdf[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
    }
    let total = cdf[ANGLE_CELLS];
    if !(total > 0.0) {
        return Err(Error::InvalidInput("angular density has zero mass".into()));
    }
    Ok(MaxwellCutoff {
        dim,
        rate: total,
        law: AngleLaw::Tabulated(cdf),
    })
}

/// Maxwell model with uniformly distributed `σ` and the given rate.
pub fn maxwell_isotropic(dim: usize, rate: f64) -> Result<MaxwellCutoff> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!(
            "maxwell model needs dimension >= 2, got {dim}"
        )));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "rate must be finite and nonnegative, got {rate}"
        )));
    }
    Ok(MaxwellCutoff {
        dim,
        rate,
        law: AngleLaw::Isotropic,
    })
}

impl MaxwellCutoff {
    fn sample_angle(&self, cdf: &[f64], rng: &mut RngStream) -> f64 {
        let target = rng.uniform() * cdf[ANGLE_CELLS];
        let k = cdf.partition_point(|c| *c <= target).clamp(1, ANGLE_CELLS);
        let (c0, c1) = (cdf[k - 1], cdf[k]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        (k as f64 - 1.0 + frac) * std::f64::consts::PI / ANGLE_CELLS as f64
    }
}

impl CollisionModel for MaxwellCutoff {
    type Param = Scatter;

    fn dim(&self) -> usize {
        self.dim
    }

    fn rate(&self, _z1: &[f64], _z2: &[f64]) -> f64 {
        self.rate
    }

    fn rate_bound(&self) -> f64 {
        self.rate
    }

    fn sample_param(&self, rng: &mut RngStream) -> Scatter {
        match &self.law {
            AngleLaw::Isotropic => Scatter::Direction(uniform_sphere(rng, self.dim)),
            AngleLaw::Tabulated(cdf) => {
                let theta = self.sample_angle(cdf, rng);
                let omega = if self.dim == 2 {
                    vec![if rng.bernoulli(0.5) { 1.0 } else { -1.0 }]
                } else {
                    uniform_sphere(rng, self.dim - 1)
                };
                Scatter::Deflection {
                    cos_theta: theta.cos(),
                    omega,
                }
            }
        }
    }

    fn collide(&self, z1: &[f64], z2: &[f64], theta: &Scatter, out1: &mut [f64], out2: &mut [f64]) -> bool {
        collide_velocities(z1, z2, theta, out1, out2);
        true
    }

    fn param_repr(&self, theta: &Scatter) -> Vec<f64> {
        scatter_repr(theta)
    }
}

/// Hard spheres in cutoff form: `λ = min(|v − v*|, Λ_cap)`, uniform `σ`.
#[derive(Clone, Debug)]
pub struct HardSphere {
    dim: usize,
    cap: f64,
}

pub fn hard_sphere_model(lambda_cap: f64, dim: usize) -> Result<HardSphere> {
    if !(lambda_cap > 0.0 && lambda_cap.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda cap must be positive, got {lambda_cap}"
        )));
    }
    if dim < 2 {
        return Err(Error::InvalidInput(format!(
            "hard-sphere model needs dimension >= 2, got {dim}"
        )));
    }
    Ok(HardSphere { dim, cap: lambda_cap })
}

impl CollisionModel for HardSphere {
    type Param = Scatter;

    fn dim(&self) -> usize {
        self.dim
    }

    fn rate(&self, z1: &[f64], z2: &[f64]) -> f64 {
        let r = z1.iter().zip(z2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        r.min(self.cap)
    }

    fn rate_bound(&self) -> f64 {
        self.cap
    }

    fn sample_param(&self, rng: &mut RngStream) -> Scatter {
        Scatter::Direction(uniform_sphere(rng, self.dim))
    }

    fn collide(&self, z1: &[f64], z2: &[f64], theta: &Scatter, out1: &mut [f64], out2: &mut [f64]) -> bool {
        collide_velocities(z1, z2, theta, out1, out2);
        true
    }

    fn param_repr(&self, theta: &Scatter) -> Vec<f64> {
        scatter_repr(theta)
    }
}

/// Coefficients `(L, R, L̃, R̃)` of a wealth exchange.
pub type Exchange = [f64; 4];

type CoefSampler = Arc<dyn Fn(&mut RngStream) -> Exchange + Send + Sync>;

/// Wealth exchange on ℝ: `ψ₁ = L z₁ + R z₂`, `ψ₂ = L̃ z₂ + R̃ z₁`, `λ = 1`.
#[derive(Clone)]
pub struct Wealth {
    sampler: CoefSampler,
    warned: Arc<AtomicBool>,
}

pub fn wealth_model(coef_sampler: impl Fn(&mut RngStream) -> Exchange + Send + Sync + 'static) -> Wealth {
    Wealth {
        sampler: Arc::new(coef_sampler),
        warned: Arc::new(AtomicBool::new(false)),
    }
}

impl CollisionModel for Wealth {
    type Param = Exchange;

    fn dim(&self) -> usize {
        1
    }

    fn rate(&self, _z1: &[f64], _z2: &[f64]) -> f64 {
        1.0
    }

    fn rate_bound(&self) -> f64 {
        1.0
    }

    fn sample_param(&self, rng: &mut RngStream) -> Exchange {
        (self.sampler)(rng)
    }

    fn collide(&self, z1: &[f64], z2: &[f64], c: &Exchange, out1: &mut [f64], out2: &mut [f64]) -> bool {
        if c.iter().any(|v| *v < 0.0) {
            if !self.warned.swap(true, Ordering::Relaxed) {
                log::warn!("wealth exchange drew negative coefficients {c:?}; such events are rejected");
            }
            return false;
        }
        out1[0] = c[0] * z1[0] + c[1] * z2[0];
        out2[0] = c[2] * z2[0] + c[3] * z1[0];
        true
    }

    fn param_repr(&self, c: &Exchange) -> Vec<f64> {
        c.to_vec()
    }
}

/// Lifts a velocity model to states `(x, v)` with free transport
/// `x += v dt`. The rate ignores positions; spatial locality comes from
/// the cells of [`bird_simulate`](super::bird_simulate).
#[derive(Clone, Debug)]
pub struct Kinetic<M> {
    pub inner: M,
    space_dim: usize,
}

impl<M: CollisionModel> Kinetic<M> {
    pub fn new(inner: M) -> Self {
        let space_dim = inner.dim();
        Self { inner, space_dim }
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }
}

impl<M: CollisionModel> CollisionModel for Kinetic<M> {
    type Param = M::Param;

    fn dim(&self) -> usize {
        2 * self.space_dim
    }

    fn velocity_range(&self) -> Range<usize> {
        self.space_dim..2 * self.space_dim
    }

    fn rate(&self, z1: &[f64], z2: &[f64]) -> f64 {
        let d = self.space_dim;
        self.inner.rate(&z1[d..], &z2[d..])
    }

    fn rate_bound(&self) -> f64 {
        self.inner.rate_bound()
    }

    fn density_bound(&self) -> f64 {
        self.inner.density_bound()
    }

    fn density_ratio(&self, z1: &[f64], z2: &[f64], theta: &M::Param) -> f64 {
        let d = self.space_dim;
        self.inner.density_ratio(&z1[d..], &z2[d..], theta)
    }

    fn sample_param(&self, rng: &mut RngStream) -> M::Param {
        self.inner.sample_param(rng)
    }

    fn collide(&self, z1: &[f64], z2: &[f64], theta: &M::Param, out1: &mut [f64], out2: &mut [f64]) -> bool {
        let d = self.space_dim;
        out1[..d].copy_from_slice(&z1[..d]);
        out2[..d].copy_from_slice(&z2[..d]);
        self.inner
            .collide(&z1[d..], &z2[d..], theta, &mut out1[d..], &mut out2[d..])
    }

    fn free_flow(&self, z: &mut [f64], dt: f64) {
        let d = self.space_dim;
        for k in 0..d {
            z[k] += z[d + k] * dt;
        }
    }

    fn has_free_flow(&self) -> bool {
        true
    }

    fn param_repr(&self, theta: &M::Param) -> Vec<f64> {
        self.inner.param_repr(theta)
    }
}
