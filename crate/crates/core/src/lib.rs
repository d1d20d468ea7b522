//! Functional-integration toolkit for linear second-order boundary-value
//! problems.
//!
//! The crate solves problems of the form
//!
//! ```text
//!   [ (s/4π) Σ_α (X_(α)·∇)² + Y·∇ + V ] Ψ = -f   on U,
//!   Ψ = φ on ∂U (Dirichlet)  or  ∂_n Ψ = ψ on ∂U (Neumann),
//! ```
//!
//! by propagating driving-noise paths through the parametrization ODE
//! `dx = Y dt + Σ_α X_(α) dz^α`, weighting them with the Feynman–Kac factor
//! `exp(∫V dt)`, and assembling elementary/boundary kernels from critical
//! first-exit times. A family of finite-dimensional integrator reductions
//! (Gaussian, Dirac, Hermite, gamma) backs the construction and is exposed
//! with exact closed forms plus quadrature cross-checks.
//!
//! Module map:
//! - [`expr`]: arithmetic expression parser for config-defined fields
//! - [`model`]: domains, fields, problem specifications
//! - [`integrators`]: Gaussian/Dirac/Hermite/gamma integrator reductions
//! - [`paths`]: discretized path sampling and batch management
//! - [`propagator`]: the Feynman–Kac semigroup `U_t` and analytic references
//! - [`critical`]: critical paths, exit times `τ⊥`, exit maps, residuals
//! - [`kernels`]: Dirichlet/Neumann elementary and boundary kernels
//! - [`solve`]: solution fields, mean exit times, operator residuals,
//!   Fredholm eigenvalues

pub mod critical;
pub mod expr;
pub mod integrators;
pub mod kernels;
pub mod model;
pub mod paths;
pub mod propagator;
pub mod quad;
pub mod rng;
pub mod solve;
pub mod special;
