use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix returned at step {step} is not orthogonal (deviation {deviation:e})")]
    NotOrthogonal { step: usize, deviation: f64 },

    #[error("vectors are not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("phase {angle} is not allowed on a one-dimensional block (only 0 or pi)")]
    InvalidPhase { angle: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("zero vector where a nonzero one is required")]
    ZeroVector,

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}
