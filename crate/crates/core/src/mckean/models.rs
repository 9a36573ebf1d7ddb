use std::sync::Arc;

use super::{McKeanModel, OuParams, Site};
use crate::ensemble::{kernel_convolve, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::rng::{make_rng, RngStream};

type VecFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type PairFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// General model in kernel-factored form:
/// `b(x, μ) = b̃(x, K1⋆μ(x))`, `σ(x, μ) = σ̃(x, K2⋆μ(x))`.
///
/// Kernel sums include the self term. Each evaluation is O(N).
#[derive(Clone)]
pub struct KernelModel {
    dim: usize,
    k1: PairFn,
    k1_dim: usize,
    b_tilde: PairFn,
    k2: PairFn,
    k2_dim: usize,
    sigma_tilde: PairFn,
}

impl KernelModel {
    /// `b_tilde(x, k1_conv, out)` writes `dim` values; `sigma_tilde(x, k2_conv, out)`
    /// writes a `dim × dim` row-major matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        k1: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        k1_dim: usize,
        b_tilde: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        k2: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        k2_dim: usize,
        sigma_tilde: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            k1: Arc::new(k1),
            k1_dim,
            b_tilde: Arc::new(b_tilde),
            k2: Arc::new(k2),
            k2_dim,
            sigma_tilde: Arc::new(sigma_tilde),
        }
    }

    fn convolve(&self, k: &PairFn, k_dim: usize, mu: &EmpiricalMeasure<'_>, x: &[f64]) -> Vec<f64> {
        // non-finite sums surface as a non-finite state in the EM update
        kernel_convolve(mu, |a, b, o| k(a, b, o), k_dim, x).unwrap_or_else(|_| vec![f64::NAN; k_dim])
    }
}

impl McKeanModel for KernelModel {
    type Field = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, _: &EmpiricalMeasure<'_>) {}

    fn drift(&self, _: Site, x: &[f64], mu: &EmpiricalMeasure<'_>, _: &(), out: &mut [f64]) {
        let k = self.convolve(&self.k1, self.k1_dim, mu, x);
        (self.b_tilde)(x, &k, out);
    }

    fn diffusion(&self, _: Site, x: &[f64], mu: &EmpiricalMeasure<'_>, _: &(), out: &mut [f64]) {
        let k = self.convolve(&self.k2, self.k2_dim, mu, x);
        (self.sigma_tilde)(x, &k, out);
    }
}

/// Mean-field OU: `dX = (−λX − κ(X − m(μ))) dt + σ dB`, coordinate-wise.
#[derive(Clone, Copy, Debug)]
pub struct MeanFieldOu {
    pub params: OuParams,
    pub dim: usize,
}

/// One-dimensional mean-field OU model.
pub fn mean_field_ou(lambda: f64, kappa: f64, sigma: f64) -> MeanFieldOu {
    MeanFieldOu {
        params: OuParams { lambda, kappa, sigma },
        dim: 1,
    }
}

impl McKeanModel for MeanFieldOu {
    type Field = Vec<f64>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, mu: &EmpiricalMeasure<'_>) -> Vec<f64> {
        mu.mean()
    }

    fn drift(&self, _: Site, x: &[f64], _: &EmpiricalMeasure<'_>, m: &Vec<f64>, out: &mut [f64]) {
        let p = self.params;
        for k in 0..self.dim {
            out[k] = -p.lambda * x[k] - p.kappa * (x[k] - m[k]);
        }
    }

    fn diffusion(&self, _: Site, _: &[f64], _: &EmpiricalMeasure<'_>, _: &Vec<f64>, out: &mut [f64]) {
        isotropic(out, self.dim, self.params.sigma);
    }

    fn ou_family(&self) -> Option<OuParams> {
        Some(self.params)
    }
}

fn isotropic(out: &mut [f64], d: usize, s: f64) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..d {
        out[k * d + k] = s;
    }
}

/// A potential given through its gradient.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `c |x|² / 2`, gradient `c x`.
    Quadratic(f64),
    /// `c |x|⁴`, gradient `4c |x|² x`.
    Quartic(f64),
    /// Arbitrary gradient.
    Gradient(VecFn),
}

impl Potential {
    pub fn gradient_fn(g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Potential::Gradient(Arc::new(g))
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Potential::Quadratic(c) => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            Potential::Quartic(c) => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = 4.0 * c * r2 * xi;
                }
            }
            Potential::Gradient(g) => g(x, out),
        }
    }

    fn quadratic_coef(&self) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            Potential::Quadratic(c) => Some(*c),
            _ => None,
        }
    }
}

/// Granular-media type system `b(x, μ) = −∇V(x) − ∇W⋆μ(x)`, `σ = const·Id`.
///
/// Kernel form: `K1(x, y) = −∇W(x − y)`, self term included.
#[derive(Clone)]
pub struct GradientSystem {
    confinement: Potential,
    interaction: Potential,
    sigma: f64,
    dim: usize,
}

/// Builds a gradient system after probing that `∇W` is odd.
pub fn gradient_system_model(
    confinement: Potential,
    interaction: Potential,
    sigma: f64,
    dim: usize,
) -> Result<GradientSystem> {
    if dim == 0 {
        return Err(Error::ModelSpec("dimension must be >= 1".into()));
    }
    let mut probe = make_rng(0x6772_6164, 0);
    let mut z = vec![0.0; dim];
    let mut neg = vec![0.0; dim];
    let mut g1 = vec![0.0; dim];
    let mut g2 = vec![0.0; dim];
    for _ in 0..64 {
        for k in 0..dim {
            z[k] = probe.uniform_range(-3.0, 3.0);
            neg[k] = -z[k];
        }
        interaction.gradient(&z, &mut g1);
        interaction.gradient(&neg, &mut g2);
        let scale = g1.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if g1.iter().zip(&g2).any(|(a, b)| (a + b).abs() > 1e-8 * scale) {
            return Err(Error::ModelSpec(format!(
                "interaction gradient is not odd at probe {z:?}"
            )));
        }
    }
    Ok(GradientSystem {
        confinement,
        interaction,
        sigma,
        dim,
    })
}

impl McKeanModel for GradientSystem {
    /// Measure mean when `W` is quadratic (then `∇W⋆μ(x) = c (x − m)`).
    type Field = Option<Vec<f64>>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, mu: &EmpiricalMeasure<'_>) -> Option<Vec<f64>> {
        self.interaction.quadratic_coef().map(|_| mu.mean())
    }

    fn drift(&self, _: Site, x: &[f64], mu: &EmpiricalMeasure<'_>, field: &Option<Vec<f64>>, out: &mut [f64]) {
        let d = self.dim;
        self.confinement.gradient(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
        match (field, self.interaction.quadratic_coef()) {
            (Some(m), Some(c)) => {
                for k in 0..d {
                    out[k] -= c * (x[k] - m[k]);
                }
            }
            _ => {
                let mut z = vec![0.0; d];
                let mut g = vec![0.0; d];
                let mut acc = vec![0.0; d];
                for y in mu.atoms() {
                    for k in 0..d {
                        z[k] = x[k] - y[k];
                    }
                    self.interaction.gradient(&z, &mut g);
                    for k in 0..d {
                        acc[k] += g[k];
                    }
                }
                let w = mu.weight();
                for k in 0..d {
                    out[k] -= acc[k] * w;
                }
            }
        }
    }

    fn diffusion(&self, _: Site, _: &[f64], _: &EmpiricalMeasure<'_>, _: &Option<Vec<f64>>, out: &mut [f64]) {
        isotropic(out, self.dim, self.sigma);
    }

    fn ou_family(&self) -> Option<OuParams> {
        match (self.confinement.quadratic_coef(), self.interaction.quadratic_coef()) {
            (Some(lambda), Some(kappa)) => Some(OuParams {
                lambda,
                kappa,
                sigma: self.sigma,
            }),
            _ => None,
        }
    }
}

/// Noisy Kuramoto oscillators,
/// `dθⁱ = ξᵢ dt − (K/N) Σⱼ sin(θⁱ − θʲ) dt + dBⁱ`.
///
/// The self term is included (it vanishes). Disorder is quenched: drawn once
/// and indexed by particle label. Phases live in ℝ.
#[derive(Clone, Debug)]
pub struct Kuramoto {
    pub coupling: f64,
    pub noise: f64,
    disorder: Option<Vec<f64>>,
}

/// `(n, sampler, rng)` for drawing natural frequencies.
pub type Disorder<'a> = (usize, &'a dyn Fn(&mut RngStream) -> f64, &'a mut RngStream);

/// Kuramoto model with unit noise; `disorder` draws `n` natural frequencies
/// once from `sampler`.
pub fn kuramoto_model(coupling: f64, disorder: Option<Disorder<'_>>) -> Kuramoto {
    let disorder = disorder.map(|(n, sampler, rng)| (0..n).map(|_| sampler(rng)).collect());
    Kuramoto {
        coupling,
        noise: 1.0,
        disorder,
    }
}

impl Kuramoto {
    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn disorder(&self) -> Option<&[f64]> {
        self.disorder.as_deref()
    }
}

impl McKeanModel for Kuramoto {
    /// `(mean cos θ, mean sin θ)`.
    type Field = (f64, f64);

    fn dim(&self) -> usize {
        1
    }

    fn field(&self, mu: &EmpiricalMeasure<'_>) -> (f64, f64) {
        let (c, s) = mu
            .atoms()
            .fold((0.0, 0.0), |(c, s), p| (c + p[0].cos(), s + p[0].sin()));
        (c * mu.weight(), s * mu.weight())
    }

    fn drift(&self, site: Site, x: &[f64], _: &EmpiricalMeasure<'_>, f: &(f64, f64), out: &mut [f64]) {
        // (1/N) Σ sin(θ − θʲ) = sin θ · C − cos θ · S
        let (c, s) = *f;
        let theta = x[0];
        let xi = self
            .disorder
            .as_ref()
            .and_then(|d| d.get(site.index))
            .copied()
            .unwrap_or(0.0);
        out[0] = xi - self.coupling * (theta.sin() * c - theta.cos() * s);
    }

    fn diffusion(&self, _: Site, _: &[f64], _: &EmpiricalMeasure<'_>, _: &(f64, f64), out: &mut [f64]) {
        out[0] = self.noise;
    }

    fn labelled(&self) -> bool {
        self.disorder.is_some()
    }
}

/// Noisy Cucker–Smale flocking on `(x, v) ∈ ℝ^d × ℝ^d`:
/// `dx = v dt`, `dv = (1/N) Σⱼ K(|xʲ − x|)(vʲ − v) dt + σ dB`,
/// `K(r) = (1 + r²)^{−γ/2}`.
#[derive(Clone, Copy, Debug)]
pub struct CuckerSmale {
    pub gamma: f64,
    pub sigma: f64,
    pub space_dim: usize,
}

pub fn cucker_smale_model(gamma: f64, sigma: f64, space_dim: usize) -> Result<CuckerSmale> {
    if !(gamma > 0.0) || sigma < 0.0 || space_dim == 0 {
        return Err(Error::ModelSpec(format!(
            "cucker-smale needs gamma > 0, sigma >= 0, d >= 1 (got {gamma}, {sigma}, {space_dim})"
        )));
    }
    Ok(CuckerSmale {
        gamma,
        sigma,
        space_dim,
    })
}

impl CuckerSmale {
    pub fn kernel(&self, r2: f64) -> f64 {
        (1.0 + r2).powf(-self.gamma / 2.0)
    }
}

impl McKeanModel for CuckerSmale {
    type Field = ();

    fn dim(&self) -> usize {
        2 * self.space_dim
    }

    fn field(&self, _: &EmpiricalMeasure<'_>) {}

    fn drift(&self, _: Site, z: &[f64], mu: &EmpiricalMeasure<'_>, _: &(), out: &mut [f64]) {
        let d = self.space_dim;
        let (x, v) = z.split_at(d);
        out[..d].copy_from_slice(v);
        let acc = &mut out[d..];
        acc.iter_mut().for_each(|a| *a = 0.0);
        for other in mu.atoms() {
            let (xj, vj) = other.split_at(d);
            let r2: f64 = x.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            let k = self.kernel(r2);
            for a in 0..d {
                acc[a] += k * (vj[a] - v[a]);
            }
        }
        let w = mu.weight();
        acc.iter_mut().for_each(|a| *a *= w);
    }

    fn diffusion(&self, _: Site, _: &[f64], _: &EmpiricalMeasure<'_>, _: &(), out: &mut [f64]) {
        let d = self.space_dim;
        let n = 2 * d;
        out.iter_mut().for_each(|v| *v = 0.0);
        for a in d..n {
            out[a * n + a] = self.sigma;
        }
    }
}

/// First-order system driven by the regularized Coulomb force
/// `F_ε(x) = ξ x / max(|x|, ε)^d`, `dXⁱ = (1/N) Σ_{j≠i} F_ε(Xⁱ − Xʲ) dt + σ dB`.
#[derive(Clone, Copy, Debug)]
pub struct RegularizedCoulomb {
    pub xi: f64,
    pub eps: f64,
    pub sigma: f64,
    pub dim: usize,
}

pub fn regularized_coulomb_model(xi: f64, eps: f64, sigma: f64, dim: usize) -> Result<RegularizedCoulomb> {
    if !(eps > 0.0) {
        return Err(Error::ModelSpec(format!("cutoff eps must be > 0, got {eps}")));
    }
    if dim == 0 {
        return Err(Error::ModelSpec("dimension must be >= 1".into()));
    }
    Ok(RegularizedCoulomb { xi, eps, sigma, dim })
}

impl RegularizedCoulomb {
    pub fn force(&self, z: &[f64], out: &mut [f64]) {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let denom = r.max(self.eps).powi(self.dim as i32);
        for (o, zk) in out.iter_mut().zip(z) {
            *o = self.xi * zk / denom;
        }
    }
}

impl McKeanModel for RegularizedCoulomb {
    type Field = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, _: &EmpiricalMeasure<'_>) {}

    fn drift(&self, site: Site, x: &[f64], mu: &EmpiricalMeasure<'_>, _: &(), out: &mut [f64]) {
        let d = self.dim;
        let mut z = vec![0.0; d];
        let mut f = vec![0.0; d];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, y) in mu.atoms().enumerate() {
            if site.member && j == site.index {
                continue;
            }
            for k in 0..d {
                z[k] = x[k] - y[k];
            }
            self.force(&z, &mut f);
            for k in 0..d {
                out[k] += f[k];
            }
        }
        let w = mu.weight();
        out.iter_mut().for_each(|v| *v *= w);
    }

    fn diffusion(&self, _: Site, _: &[f64], _: &EmpiricalMeasure<'_>, _: &(), out: &mut [f64]) {
        isotropic(out, self.dim, self.sigma);
    }
}
