use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kernel produced a non-finite value against particle {index}")]
    NonFiniteKernel { index: usize },

    #[error("all weights are zero or non-finite")]
    DegenerateWeights,

    #[error("non-finite drift or diffusion for particle {particle} at t = {time} (step {step})")]
    Step { particle: usize, time: f64, step: usize },

    #[error("reference law not supported for this model: {0}")]
    UnsupportedReference(String),

    #[error("model specification error: {0}")]
    ModelSpec(String),

    #[error("bound violation at t = {time}: ratio {ratio} exceeds 1 ({what})")]
    BoundViolation { time: f64, ratio: f64, what: &'static str },

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("linear algebra: {0}")]
    LinearAlgebra(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
