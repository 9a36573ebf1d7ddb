use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::rng::RngStream;

type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Forward map `𝒢: ℝ^d → ℝ^k`.
#[derive(Clone)]
pub enum ForwardMap {
    Linear(DMatrix<f64>),
    /// Callable map; the Jacobian is only needed by the gradient mode.
    Nonlinear {
        map: MapFn,
        out_dim: usize,
        jacobian: Option<JacobianFn>,
    },
}

impl ForwardMap {
    fn out_dim(&self) -> usize {
        match self {
            ForwardMap::Linear(g) => g.nrows(),
            ForwardMap::Nonlinear { out_dim, .. } => *out_dim,
        }
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        match self {
            ForwardMap::Linear(g) => g * DVector::from_column_slice(x),
            ForwardMap::Nonlinear { map, .. } => DVector::from_vec(map(x)),
        }
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        match self {
            ForwardMap::Linear(g) => Some(g.clone()),
            ForwardMap::Nonlinear { jacobian, .. } => jacobian.as_ref().map(|j| j(x)),
        }
    }
}

/// Ensemble Kalman sampler settings for the target
/// `exp(−|𝒢(x) − y|²_Γ/2 − |x|²_Γ₀/2)`.
#[derive(Clone)]
pub struct EksConfig {
    pub forward: ForwardMap,
    pub gamma: DMatrix<f64>,
    pub gamma0: DMatrix<f64>,
    pub y: DVector<f64>,
    pub dt: f64,
    pub steps: usize,
    pub derivative_free: bool,
}

/// Outcome of [`eks_sample`].
#[derive(Clone, Debug)]
pub struct EksRun {
    pub ensemble: Ensemble,
    /// `N < d + 1`: the ensemble covariance cannot have full rank.
    pub rank_deficient: bool,
    /// The covariance vanished at some step, freezing the dynamics.
    pub frozen: bool,
}

/// Inverse of an SPD matrix via Cholesky, naming the matrix on failure.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Config(format!("{name} must be square")));
    }
    if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Config(format!("{name} is not positive definite")))
}

/// `√M` for a symmetric positive semidefinite `M`; negative eigenvalues
/// (rounding) are clipped to zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Exact posterior `(mean, cov)` of the linear-gaussian problem:
/// `cov = (Γ₀⁻¹ + GᵀΓ⁻¹G)⁻¹`, `mean = cov GᵀΓ⁻¹y`.
pub fn posterior_gaussian_oracle(
    g: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    gamma0: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let gamma_chol = gamma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Config("gamma is not positive definite".into()))?;
    let gamma0_inv = spd_inverse(gamma0, "gamma0")?;
    let gi_g = gamma_chol.solve(g);
    let precision = gamma0_inv + g.transpose() * gi_g;
    let pchol = precision
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("posterior precision is singular".into()))?;
    let rhs = g.transpose() * gamma_chol.solve(y);
    Ok((pchol.solve(&rhs), pchol.inverse()))
}

fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    x.column_sum() / x.ncols() as f64
}

/// `(1/N) Σ (aʲ − ā)(bʲ − b̄)ᵀ` for columns `aʲ`, `bʲ`.
fn cross_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols() as f64;
    let ca = a - column_mean(a) * DMatrix::from_element(1, a.ncols(), 1.0);
    let cb = b - column_mean(b) * DMatrix::from_element(1, b.ncols(), 1.0);
    ca * cb.transpose() / n
}

/// Euler–Maruyama on `dX = −Cov[μ]∇Φ_R(X) dt + √(2Cov[μ]) dB`.
///
/// In derivative-free mode the drift is
/// `−Cov[μ,𝒢]Γ⁻¹(𝒢(X) − y) − Cov[μ]Γ₀⁻¹X`; for linear `𝒢` the two modes
/// agree up to rounding.
pub fn eks_sample(cfg: &EksConfig, e0: &Ensemble, rng: &mut RngStream) -> Result<EksRun> {
    let d = e0.dim();
    let n = e0.n();
    let k = cfg.forward.out_dim();
    if cfg.gamma0.nrows() != d || cfg.gamma.nrows() != k || cfg.y.len() != k {
        return Err(Error::Config(format!(
            "dimension mismatch: state {d}, observation {k}, gamma {}x{}, gamma0 {}x{}, y {}",
            cfg.gamma.nrows(),
            cfg.gamma.ncols(),
            cfg.gamma0.nrows(),
            cfg.gamma0.ncols(),
            cfg.y.len()
        )));
    }
    if let ForwardMap::Linear(g) = &cfg.forward {
        if g.ncols() != d {
            return Err(Error::Config(format!(
                "forward matrix has {} columns, state has {d}",
                g.ncols()
            )));
        }
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {}", cfg.dt)));
    }
    let gamma_inv = spd_inverse(&cfg.gamma, "gamma")?;
    let gamma0_inv = spd_inverse(&cfg.gamma0, "gamma0")?;
    if !cfg.derivative_free && cfg.forward.jacobian(e0.particle(0)).is_none() {
        return Err(Error::Config(
            "gradient mode needs a Jacobian for a nonlinear forward map".into(),
        ));
    }
    let rank_deficient = n < d + 1;
    if rank_deficient {
        log::warn!("ensemble of {n} particles in dimension {d}: covariance is rank deficient");
    }
    let mut x = DMatrix::from_column_slice(d, n, e0.states());
    let mut frozen = false;
    let sq_dt = cfg.dt.sqrt();
    let mut xi = vec![0.0; d];
    for step in 0..cfg.steps {
        let cov = cross_covariance(&x, &x);
        if cov.iter().all(|v| *v == 0.0) {
            frozen = true;
        }
        let root = symmetric_sqrt(&(&cov * 2.0));
        let gx = DMatrix::from_columns(
            &x.column_iter()
                .map(|c| cfg.forward.eval(c.as_slice()))
                .collect::<Vec<_>>(),
        );
        let residual = &gx - &cfg.y * DMatrix::from_element(1, n, 1.0);
        let drift = if cfg.derivative_free {
            let cxg = cross_covariance(&x, &gx);
            -(cxg * &gamma_inv * &residual) - &cov * &gamma0_inv * &x
        } else {
            let mut grad = DMatrix::zeros(d, n);
            for j in 0..n {
                let jac = cfg.forward.jacobian(x.column(j).as_slice()).expect("checked above");
                let gj = jac.transpose() * &gamma_inv * residual.column(j) + &gamma0_inv * x.column(j);
                grad.set_column(j, &gj);
            }
            -(&cov * grad)
        };
        for j in 0..n {
            rng.fill_gaussian(&mut xi);
            let noise = &root * DVector::from_column_slice(&xi);
            let mut col = x.column_mut(j);
            col += drift.column(j) * cfg.dt + noise * sq_dt;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step,
                what: "ensemble state".into(),
            });
        }
    }
    Ok(EksRun {
        ensemble: Ensemble::new(x.as_slice().to_vec(), d, e0.time + cfg.dt * cfg.steps as f64)?,
        rank_deficient,
        frozen,
    })
}

/// Ensemble mean and 1/N covariance as nalgebra values.
pub fn ensemble_moments(e: &Ensemble) -> (DVector<f64>, DMatrix<f64>) {
    let x = DMatrix::from_column_slice(e.dim(), e.n(), e.states());
    (column_mean(&x), cross_covariance(&x, &x))
}
