//! The two-parameter gamma integrator: the scale-invariant analogue of the
//! (translation-invariant) Gaussian integrator.
//!
//! Its line reduction is the gamma probability density up to (−ω)^ν:
//!
//! ```text
//!   ∫ Dγ_{ω,ν} → ∫₀^∞ e^{ωu} u^{ν-1} du / Γ(ν) = (−ω)^{−ν},
//! ```
//!
//! with a circle variant normalized by the lower incomplete gamma and an
//! imaginary-axis variant obtained by rotating the contour. The ν → 0⁺,
//! |ω| → ∞ member is the scale-invariant, normalized d(ln t) measure used
//! by the kernel construction.

use num_complex::Complex64;

use super::IntegratorError;
use crate::quad::{integrate_adaptive, integrate_log_measure, integrate_zero_inf, GaussLegendre};
use crate::special::{gamma as gamma_fn, lower_inc_gamma};

/// Reduction contour C₊ for the range of τ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contour {
    /// τ = τ*: the positive real axis.
    PositiveReal,
    /// τ = −τ*: the imaginary axis (both rays, averaged).
    ImaginaryAxis,
    /// Periodic paths: the unit circle parametrized over [0, 1].
    Circle,
}

/// Parameters (ω, ν) of one gamma integrator.
///
/// Only the parameter axes the reductions actually use are supported: ω real
/// with Re(−ω) > 0 and ν real with Re(ν) > 0. Complex values off these axes
/// enter solely through the contour choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSpec {
    pub omega: f64,
    pub nu: f64,
    pub contour: Contour,
}

impl GammaSpec {
    pub fn new(omega: f64, nu: f64, contour: Contour) -> Result<Self, IntegratorError> {
        if -omega <= 0.0 {
            return Err(IntegratorError::ParameterDomain(format!(
                "gamma integrator requires Re(−ω) > 0 (got ω = {omega})"
            )));
        }
        if nu <= 0.0 {
            return Err(IntegratorError::ParameterDomain(format!(
                "gamma integrator requires Re(ν) > 0 (got ν = {nu})"
            )));
        }
        Ok(Self { omega, nu, contour })
    }

    pub fn line(omega: f64, nu: f64) -> Result<Self, IntegratorError> {
        Self::new(omega, nu, Contour::PositiveReal)
    }
}

/// Normalization ∫ Dγ_{ω,ν} = (−ω)^{−ν}.
pub fn gamma_normalize(spec: &GammaSpec) -> f64 {
    (-spec.omega).powf(-spec.nu)
}

/// Moments: ∫ τ(t_b)^ρ Dγ_{ω,ν} = Γ(ν+ρ)/Γ(ν) · (−ω)^{−(ν+ρ)} on line
/// contours; on the circle the Γ-ratio becomes the ratio of lower incomplete
/// gammas γ(ν+ρ, −ω)/γ(ν, −ω) against the circle normalization.
pub fn gamma_moment(spec: &GammaSpec, rho: f64) -> Result<f64, IntegratorError> {
    if spec.nu + rho <= 0.0 {
        return Err(IntegratorError::ParameterDomain(format!(
            "moment requires Re(ν+ρ) > 0 (got {})",
            spec.nu + rho
        )));
    }
    let shifted = GammaSpec {
        nu: spec.nu + rho,
        ..*spec
    };
    match spec.contour {
        Contour::PositiveReal | Contour::ImaginaryAxis => {
            Ok(gamma_fn(spec.nu + rho) / gamma_fn(spec.nu) * gamma_normalize(&shifted))
        }
        Contour::Circle => {
            let ratio = lower_inc_gamma(spec.nu + rho, -spec.omega)?
                / lower_inc_gamma(spec.nu, -spec.omega)?;
            Ok(ratio * circle_normalize(&shifted))
        }
    }
}

/// Normalization of the circle reduction: (1 − e^ω)·(−ω)^{−ν}. The extra
/// prefactor accounts for the truncated domain of the periodic paths.
fn circle_normalize(spec: &GammaSpec) -> f64 {
    (1.0 - spec.omega.exp()) * gamma_normalize(spec)
}

/// Contour quadrature of ∫ F(u) e^{ωu} u^{ν−1} du / Γ(ν) over C₊ (line and
/// circle contours take real arguments; the imaginary axis is complex).
///
/// For the circle the integrand is taken against the truncated density with
/// the (1 − e^ω) prefactor and γ(ν, −ω) normalization.
pub fn gamma_reduce<F>(spec: &GammaSpec, f: F) -> Result<f64, IntegratorError>
where
    F: Fn(f64) -> f64,
{
    match spec.contour {
        Contour::PositiveReal => {
            let omega = spec.omega;
            let nu = spec.nu;
            let value = integrate_zero_inf(nu, 1e-11, |u| {
                f(u) * (omega * u).exp() * u.powf(nu - 1.0)
            })?;
            Ok(value / gamma_fn(nu))
        }
        Contour::Circle => {
            let omega = spec.omega;
            let nu = spec.nu;
            // (0, 1] with the integrable u^{ν-1} endpoint via u = e^w.
            let w_min = (1e-18f64.ln() - 5.0) / nu;
            let value = integrate_adaptive(w_min, 0.0, 1e-12, |w| {
                let u = w.exp();
                f(u) * (omega * u).exp() * u.powf(nu)
            })?;
            Ok((1.0 - omega.exp()) * value / lower_inc_gamma(nu, -omega)?)
        }
        Contour::ImaginaryAxis => Err(IntegratorError::ParameterDomain(
            "imaginary-axis reductions take complex integrands; use gamma_reduce_imaginary_axis"
                .into(),
        )),
    }
}

/// Imaginary-axis reduction: the average of the two rotated rays,
///
/// ```text
///   ½ [ i^ν ∫₀^∞ F(iv) e^{iωv} v^{ν−1} dv
///     + (−i)^ν ∫₀^∞ F(−iv) e^{−iωv} v^{ν−1} dv ] / Γ(ν).
/// ```
///
/// The conditionally convergent oscillatory integrals are evaluated with an
/// exponential damping e^{−εv} and Richardson-extrapolated to ε → 0.
pub fn gamma_reduce_imaginary_axis<F>(
    spec: &GammaSpec,
    f: F,
) -> Result<Complex64, IntegratorError>
where
    F: Fn(Complex64) -> Complex64,
{
    let nu = spec.nu;
    let omega = spec.omega;
    let i = Complex64::new(0.0, 1.0);
    let i_pow = (i.ln() * nu).exp();
    let mi_pow = ((-i).ln() * nu).exp();

    let epsilons: Vec<f64> = [0.2, 0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|c| c * omega.abs())
        .collect();
    let mut damped = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let plus = oscillatory_ray(nu, omega, eps, |v| f(i * v))?;
        let minus = oscillatory_ray(nu, -omega, eps, |v| f(-i * v))?;
        damped.push((i_pow * plus + mi_pow * minus) / (2.0 * gamma_fn(nu)));
    }
    Ok(neville_extrapolate(&epsilons, &damped))
}

/// ∫₀^∞ g(v) e^{(iw − ε)v} v^{ν−1} dv with |w|-period panels.
fn oscillatory_ray<G>(nu: f64, w: f64, eps: f64, g: G) -> Result<Complex64, IntegratorError>
where
    G: Fn(f64) -> Complex64,
{
    let rule = GaussLegendre::new(48);
    let period = 2.0 * std::f64::consts::PI / w.abs().max(1e-6);
    let v0 = period.min(1.0);
    // Singular head (0, v0]: substitute v = e^y.
    let y_min = (1e-18f64.ln() - 5.0) / nu;
    let y_max = v0.ln();
    let mut total = complex_gl(&rule, y_min, y_max, |y| {
        let v = y.exp();
        g(v) * Complex64::new(0.0, w * v).exp() * (-eps * v).exp() * v.powf(nu)
    });
    // Period panels, stopped once the damped envelope is negligible.
    let mut lo = v0;
    let mut quiet = 0;
    for _ in 0..100_000 {
        let hi = lo + period;
        let panel = complex_gl(&rule, lo, hi, |v| {
            g(v) * Complex64::new(0.0, w * v).exp() * (-eps * v).exp() * v.powf(nu - 1.0)
        });
        total += panel;
        if panel.norm() <= 1e-12 * total.norm().max(1e-300) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    Err(IntegratorError::Quadrature(
        crate::quad::QuadError::Divergent("oscillatory ray did not settle".into()),
    ))
}

fn complex_gl<G>(rule: &GaussLegendre, a: f64, b: f64, g: G) -> Complex64
where
    G: Fn(f64) -> Complex64,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += g(mid + half * x) * *w;
    }
    acc * half
}

/// Neville polynomial extrapolation of tabulated values to argument 0.
fn neville_extrapolate(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    let mut table: Vec<Complex64> = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for j in 0..n - level {
            let x0 = xs[j];
            let x1 = xs[j + level];
            table[j] = (table[j + 1] * x0 - table[j] * x1) / (x0 - x1);
        }
    }
    table[0]
}

/// The d(ln t) member of the family (ν → 0⁺, |ω| → ∞):
/// 𝒩 · ∫_{C₊} F(t) d(ln t) on log-spaced nodes.
///
/// The caller supplies the normalization 𝒩 standing in for the indeterminate
/// limit factor; F(t)/t must be integrable at both endpoints or the
/// quadrature reports divergence.
pub fn dtau_reduce<F>(f: F, normalization: f64) -> Result<f64, IntegratorError>
where
    F: Fn(f64) -> f64,
{
    Ok(normalization * integrate_log_measure(1e-11, f)?)
}
