//! Finite-dimensional reductions of the four integrator families: Gaussian,
//! Dirac (zero-width limit), Hermite (Gaussian weighted by a Hermite
//! polynomial), and gamma (the scale-invariant analogue of the Gaussian).
//!
//! Only the reductions are computable objects; the infinite-dimensional
//! characterizations enter through the closed forms they pin down
//! (normalizations, moments, covariances), which the quadrature routines
//! here reproduce and the test suites cross-check.

mod dirac;
mod gamma;
mod gaussian;
mod hermite;

pub use dirac::{dirac_compose, dirac_gaussian_limit};
pub use gamma::{
    dtau_reduce, gamma_moment, gamma_normalize, gamma_reduce, gamma_reduce_imaginary_axis,
    Contour, GammaSpec,
};
pub use gaussian::{
    gaussian_covariance, gaussian_reduce, gaussian_stein_residual, GaussianSpec, SteinResidual,
};
pub use hermite::{
    generating_series_term, hermite_polynomial, hermite_reduce, normal_ordered_moment,
    normal_ordered_monomial, HermiteSpec,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("parameter outside the supported domain: {0}")]
    ParameterDomain(String),
    #[error("covariance matrix is not symmetric positive-definite")]
    NonPositiveDefinite,
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] crate::quad::QuadError),
    #[error("Jacobian is singular at root {0:?}")]
    SingularJacobian(Vec<f64>),
    #[error("{0:?} is not a zero of the map (|M| = {1:e})")]
    NotARoot(Vec<f64>, f64),
    #[error("sample budget {0} is below the minimum of {1}")]
    BudgetTooSmall(usize, usize),
    #[error("special function evaluation failed: {0}")]
    Special(#[from] crate::special::SpecialError),
}
