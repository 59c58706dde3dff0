use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value in grid field at ring {ring}, column {col}")]
    NonFinite { ring: usize, col: usize },
    #[error("input is not in S: largest l <= 1 coefficient {max_low:.3e} exceeds tolerance {tol:.3e}")]
    NotInS { max_low: f64, tol: f64 },
    #[error("mass constraint violated: mean {mean} differs from alpha {alpha}")]
    ConstraintViolation { mean: f64, alpha: f64 },
    #[error("time step fell below dt_min = {dt_min:e} at t = {t}")]
    StepUnderflow { t: f64, dt_min: f64 },
    #[error("divergence at t = {t}: max |phi| = {max_abs}")]
    Divergence { t: f64, max_abs: f64 },
    #[error("invalid flow parameters: {0}")]
    InvalidFlowParams(String),
    #[error("invalid cap set: {0}")]
    InvalidCapSet(String),
    #[error("interface not found: phi does not change sign along the meridian")]
    InterfaceNotFound,
}

pub type Result<T> = std::result::Result<T, Error>;
