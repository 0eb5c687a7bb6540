//! Special functions and small dense complex linear algebra.

mod bessel;
mod linalg;

pub use bessel::{bessel_j, bessel_j_integral, MAX_ARG, MAX_ORDER};
pub use linalg::{
    gram_inverse, zf_noise_amplification, zf_pseudo_inverse, zf_pseudo_inverse_bounded,
    ComplexMatrix, GramInverse, DEFAULT_CONDITION_BOUND,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("numerical method did not converge: {0}")]
    NonConvergence(String),
}
