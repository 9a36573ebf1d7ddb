//! Particle methods for optimization and sampling: consensus-based
//! optimization and the ensemble Kalman sampler.

mod cbo;
mod eks;

pub use cbo::{cbo_minimize, rastrigin, CboConfig, CboResult};
pub use eks::{eks_sample, ensemble_moments, posterior_gaussian_oracle, symmetric_sqrt, EksConfig, EksRun, ForwardMap};
