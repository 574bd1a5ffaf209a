use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel derivative of order {0} is not supported (expected 1 or 2)")]
    UnsupportedOrder(u32),

    #[error("dataset is empty")]
    EmptyData,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no censored observations; the censoring model cannot be fitted")]
    NoCensoredObservations,

    #[error("singular Hessian in Newton iteration {iteration}")]
    SingularHessian { iteration: usize },

    #[error("all kernel weights vanish at z = {z} (bandwidth {bandwidth})")]
    EmptyWindow { z: f64, bandwidth: f64 },

    #[error("empty kernel neighborhood at index value {t} (bandwidth {bandwidth})")]
    EmptyNeighborhood { t: f64, bandwidth: f64 },

    #[error("trimming keeps {kept} points, at least {required} required")]
    IllConditionedTrim { kept: usize, required: usize },

    #[error("every bandwidth in the grid failed")]
    NoUsableBandwidth,

    #[error("censoring target {target} unreachable: achievable range [{low}, {high}]")]
    BracketFailure { target: f64, low: f64, high: f64 },

    #[error("{failed} of {total} replicates failed")]
    ReplicateFailure { failed: usize, total: usize },
}
