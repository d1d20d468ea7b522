//! The Dirac integrator: the zero-width limit of the Gaussian family.
//!
//! Composed with a map M with isolated nondegenerate zeros it evaluates to
//! Σ_roots |det M'(x₀)|⁻¹ F(x₀); the narrow-Gaussian quadrature oracle
//! recovers the same value as the width parameter s → 0.

use super::IntegratorError;
use crate::quad::GaussLegendre;

/// Σ over roots of |det M'(x₀)|⁻¹ · F(x₀).
///
/// Each claimed root is validated (|M(x₀)| ≤ 1e-8·(1+|x₀|)) and its Jacobian
/// is computed by central differences; a singular Jacobian is an error.
pub fn dirac_compose<F, M>(f: F, m: M, roots: &[Vec<f64>]) -> Result<f64, IntegratorError>
where
    F: Fn(&[f64]) -> f64,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let mut total = 0.0;
    for root in roots {
        let k = root.len();
        let at_root = m(root);
        let m_norm = at_root.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x_norm = root.iter().map(|v| v * v).sum::<f64>().sqrt();
        if m_norm > 1e-8 * (1.0 + x_norm) {
            return Err(IntegratorError::NotARoot(root.clone(), m_norm));
        }
        // Jacobian by central differences.
        let mut jac = nalgebra::DMatrix::zeros(k, k);
        let mut probe = root.clone();
        for j in 0..k {
            let h = 1e-6 * (1.0 + root[j].abs());
            probe[j] = root[j] + h;
            let fp = m(&probe);
            probe[j] = root[j] - h;
            let fm = m(&probe);
            probe[j] = root[j];
            for i in 0..k {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = jac.determinant().abs();
        if det < 1e-12 {
            return Err(IntegratorError::SingularJacobian(root.clone()));
        }
        total += f(root) / det;
    }
    Ok(total)
}

/// Narrow-Gaussian quadrature oracle for the 1-D composition
/// ∫ F(x) δ_s(M(x)) dx with δ_s(y) = s^{-1/2} exp(-π y²/s).
///
/// The mass concentrates in windows of width ~√s around the roots, so the
/// integral is taken over root-centered panels wide enough to capture the
/// Gaussian tails.
pub fn dirac_gaussian_limit<F, M>(f: F, m: M, roots: &[f64], s: f64) -> f64
where
    F: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
{
    assert!(s > 0.0);
    let width = (s / (2.0 * std::f64::consts::PI)).sqrt();
    let rule = GaussLegendre::new(96);
    let mut total = 0.0;
    for &r in roots {
        // 14σ panels; |M'| near the root rescales the effective width, so
        // pad generously and split into an inner and outer region.
        let pad = 14.0 * width.max(1e-12);
        for (a, b) in [(r - pad, r - pad / 8.0), (r - pad / 8.0, r + pad / 8.0), (r + pad / 8.0, r + pad)] {
            total += rule.integrate(a, b, |x| {
                let y = m(x);
                f(x) * (-std::f64::consts::PI * y * y / s).exp() / s.sqrt()
            });
        }
    }
    total
}
