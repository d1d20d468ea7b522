//! The Hermite integrator: the Gaussian integrator weighted by an n-th
//! (physicists') Hermite polynomial of the normalized argument.
//!
//! Its 1-D reduction over a single linear form with pairing W(z') is
//!
//! ```text
//!   ∫ F Dρ_{n,s} = |πsW/2|^{n/2} |sW|^{-1/2}
//!                  ∫ F(u) H_n(√(π/(sW)) u) e^{-π u²/(sW)} du,
//! ```
//!
//! which integrates normal-ordered monomials orthogonally:
//! ∫ :⟨z',z⟩^m: Dρ_{n,s} = |πsW|^m n! δ_{nm}.

use super::IntegratorError;
use crate::quad::integrate_adaptive;

/// Parameters of one Hermite integrator reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteSpec {
    /// Polynomial order; capped at 20 for numerical stability of the
    /// recurrence/quadrature combination.
    pub order: usize,
    pub s: f64,
    /// Scalar pairing W(z') > 0.
    pub w: f64,
}

impl HermiteSpec {
    pub fn new(order: usize, s: f64, w: f64) -> Result<Self, IntegratorError> {
        if order > 20 {
            return Err(IntegratorError::ParameterDomain(format!(
                "Hermite order capped at 20 (got {order})"
            )));
        }
        if s <= 0.0 || w <= 0.0 {
            return Err(IntegratorError::ParameterDomain(
                "Hermite spec requires s > 0 and W > 0".into(),
            ));
        }
        Ok(Self { order, s, w })
    }

    fn pi_sw(&self) -> f64 {
        std::f64::consts::PI * self.s * self.w
    }
}

/// Physicists' Hermite polynomial H_n(x) by the three-term recurrence.
pub fn hermite_polynomial(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0 * x,
        _ => {
            let mut h0 = 1.0;
            let mut h1 = 2.0 * x;
            for k in 1..n {
                let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Evaluate the 1-D reduction integral for an integrand F of the reduced
/// variable u = ⟨z', z⟩.
///
/// For F ≡ 1 this reproduces the normalization δ_{n0}; quadrature runs in
/// the normalized variable ξ = √(π/(sW))·u over a window covering both the
/// Gaussian mass and the oscillation range of H_n.
pub fn hermite_reduce<F>(spec: &HermiteSpec, f: F) -> Result<f64, IntegratorError>
where
    F: Fn(f64) -> f64,
{
    let n = spec.order;
    let scale = (spec.s * spec.w / std::f64::consts::PI).sqrt();
    let prefactor = (spec.pi_sw() / 2.0).powf(n as f64 / 2.0) / std::f64::consts::PI.sqrt();
    let half_width = (2.0 * n as f64 + 1.0).sqrt() + 12.0;
    let integral = integrate_adaptive(-half_width, half_width, 1e-12, |xi| {
        f(scale * xi) * hermite_polynomial(n, xi) * (-xi * xi).exp()
    })?;
    Ok(prefactor * integral)
}

/// The normal-ordered monomial :u^m: as a plain function of u:
/// |πsW/2|^{m/2}·H_m(√(π/(sW))·u).
pub fn normal_ordered_monomial(spec: &HermiteSpec, m: usize) -> impl Fn(f64) -> f64 {
    let coeff = (spec.pi_sw() / 2.0).powf(m as f64 / 2.0);
    let scale = (std::f64::consts::PI / (spec.s * spec.w)).sqrt();
    move |u: f64| coeff * hermite_polynomial(m, scale * u)
}

/// Closed form of ∫ :⟨z',z⟩^m: Dρ_{n,s} = |πsW|^m · n! · δ_{nm},
/// for m, n ≤ 12.
pub fn normal_ordered_moment(spec: &HermiteSpec, m: usize) -> Result<f64, IntegratorError> {
    if m > 12 || spec.order > 12 {
        return Err(IntegratorError::ParameterDomain(format!(
            "normal-ordered moments supported for m, n ≤ 12 (got m={m}, n={})",
            spec.order
        )));
    }
    if m != spec.order {
        return Ok(0.0);
    }
    Ok(spec.pi_sw().powi(m as i32) * factorial(m))
}

/// The n-th term of the normal-ordered exponential series,
/// (1/n!)·∫ :e^{⟨z',z⟩}: Dρ_{n,s} = (πsW)^n / n!.
///
/// Summing over n reproduces the Taylor expansion of e^{πsW} term by term.
pub fn generating_series_term(spec: &HermiteSpec, n: usize) -> f64 {
    spec.pi_sw().powi(n as i32) / factorial(n)
}
