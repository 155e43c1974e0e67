use thiserror::Error;

use crate::caratheodory::Classification;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("series order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid order {0}: must be at least 1")]
    InvalidOrder(usize),

    #[error("invalid atom: {0}")]
    InvalidAtom(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("coefficients are not on the boundary of the coefficient body ({0})")]
    NotOnBoundary(Classification),

    #[error("ill-conditioned system (condition number {0:.3e})")]
    Conditioning(f64),

    #[error("trigonometric polynomial is negative (minimum {min:.6e} at phi = {phi:.6})")]
    NotNonnegative { min: f64, phi: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("cannot normalize: leading coefficient f_n vanishes")]
    CannotNormalize,

    #[error("objective is not differentiable where f_n = 0")]
    Nondifferentiable,
}
