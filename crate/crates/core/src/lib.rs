//! Simulation and verification toolkit for mean-field interacting particle
//! systems.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boltzmann;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod jump;
pub mod mckean;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod schemes1d;

pub use ensemble::{EmpiricalMeasure, Ensemble, TimeGrid};
pub use error::{Error, Result};
pub use rng::{make_rng, RngStream};
