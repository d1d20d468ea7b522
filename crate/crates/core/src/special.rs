//! Special functions used by the integrator reductions: log-gamma, the
//! (non-regularized) incomplete gamma functions, and the confluent
//! hypergeometric series ₁F₁.

use thiserror::Error;

/// Iteration cap shared by the series and continued-fraction evaluations.
const MAX_ITER: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("argument outside the function domain: {0}")]
    Domain(String),
    #[error("series/continued fraction failed to converge")]
    NoConvergence,
}

/// Lanczos coefficients (g = 7, n = 9), double precision.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    // Reflection is not needed on the positive axis.
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Gamma function for x > 0.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Lower incomplete gamma γ(a, x) = ∫₀ˣ t^{a−1} e^{−t} dt, a > 0, x ≥ 0.
///
/// Series expansion for x < a + 1, Lentz continued fraction otherwise; the
/// two branches avoid cancellation in the respective regimes.
pub fn lower_inc_gamma(a: f64, x: f64) -> Result<f64, SpecialError> {
    if a <= 0.0 || x < 0.0 {
        return Err(SpecialError::Domain(format!(
            "lower_inc_gamma requires a > 0, x >= 0 (got a={a}, x={x})"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let ln_prefactor = a * x.ln() - x - ln_gamma(a);
    let regularized = if x < a + 1.0 {
        series_p(a, x, ln_prefactor.exp())?
    } else {
        1.0 - cf_q(a, x, ln_prefactor.exp())?
    };
    Ok(regularized * gamma(a))
}

/// Upper incomplete gamma Γ(a, x) = Γ(a) − γ(a, x).
pub fn upper_inc_gamma(a: f64, x: f64) -> Result<f64, SpecialError> {
    Ok(gamma(a) - lower_inc_gamma(a, x)?)
}

/// Regularized series for P(a, x) = γ(a, x)/Γ(a), valid for x < a + 1.
fn series_p(a: f64, x: f64, prefactor: f64) -> Result<f64, SpecialError> {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON {
            return Ok(prefactor * sum);
        }
    }
    Err(SpecialError::NoConvergence)
}

/// Modified Lentz continued fraction for Q(a, x) = Γ(a, x)/Γ(a), x ≥ a + 1.
fn cf_q(a: f64, x: f64, prefactor: f64) -> Result<f64, SpecialError> {
    let tiny = 1e-300;
    let b0 = x + 1.0 - a;
    let mut f = if b0.abs() < tiny { tiny } else { b0 };
    let mut c = f;
    let mut d = 0.0_f64;
    for n in 1..=MAX_ITER {
        let nf = n as f64;
        let an = nf * (a - nf);
        let bn = x + 2.0 * nf + 1.0 - a;
        d = bn + an * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = 1.0 / d;
        c = bn + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            return Ok(prefactor / f);
        }
    }
    Err(SpecialError::NoConvergence)
}

/// Confluent hypergeometric series ₁F₁(a; b; z) with ratio-based truncation
/// at 1e-14 relative.
pub fn hyp1f1(a: f64, b: f64, z: f64) -> Result<f64, SpecialError> {
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(SpecialError::Domain(format!(
            "hyp1f1 undefined for non-positive integer b (got b={b})"
        )));
    }
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 0..MAX_ITER {
        let kf = k as f64;
        term *= (a + kf) * z / ((b + kf) * (kf + 1.0));
        sum += term;
        if term.abs() <= 1e-14 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(SpecialError::NoConvergence)
}
