//! Gauss–Legendre quadrature and the adaptive integration helpers shared by
//! the integrator reductions and the kernel time integrals.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature failed to converge to tolerance {tol:e} (last change {last:e})")]
    NoConvergence { tol: f64, last: f64 },
    #[error("integrand appears divergent: {0}")]
    Divergent(String),
}

/// A Gauss–Legendre rule on the reference interval [-1, 1].
///
/// Nodes are roots of the Legendre polynomial P_n, found by Newton iteration
/// from the Chebyshev initial guess; weights are 2 / ((1-x²) P_n'(x)²).
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-like initial guess for the i-th root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate f over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integrate f over [a, b], also returning ∫|f| as a scale for
    /// convergence decisions on integrals that cancel to zero.
    pub fn integrate_with_abs<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> (f64, f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        let mut acc_abs = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            acc += w * v;
            acc_abs += w * v.abs();
        }
        (acc * half, acc_abs * half.abs())
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (mid + half * x, w * half))
            .collect()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate f over [a, b] by doubling the Gauss–Legendre order until two
/// successive estimates agree to `rel_tol`.
///
/// The acceptance test uses ∫|f| as the scale, so integrals that cancel to
/// zero converge on absolute grounds instead of chasing relative digits of
/// roundoff noise.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    rel_tol: f64,
    mut f: F,
) -> Result<f64, QuadError> {
    let mut order = 16;
    let (mut prev, _) = GaussLegendre::new(order).integrate_with_abs(a, b, &mut f);
    for _ in 0..7 {
        order *= 2;
        let (next, next_abs) = GaussLegendre::new(order).integrate_with_abs(a, b, &mut f);
        let change = (next - prev).abs();
        if change <= rel_tol * next.abs() + 1e-14 * next_abs + 1e-300 {
            return Ok(next);
        }
        prev = next;
    }
    Err(QuadError::NoConvergence {
        tol: rel_tol,
        last: prev,
    })
}

/// Integrate g over (0, ∞) for integrands with an integrable power behavior
/// u^{p-1} near zero (p > 0) and eventual exponential decay.
///
/// The singular piece on (0, 1] is handled by the substitution u = e^w, which
/// turns u^{p-1} du into e^{p w} dw on (-∞, 0]; the tail is summed over
/// geometrically growing panels until a panel contributes less than
/// `rel_tol` of the running total.
pub fn integrate_zero_inf<F: FnMut(f64) -> f64>(
    p: f64,
    rel_tol: f64,
    mut g: F,
) -> Result<f64, QuadError> {
    assert!(p > 0.0, "endpoint power must be positive");
    // (0, 1]: u = e^w, w in (-inf, 0]. The integrand decays like e^{p w}.
    let w_min = (rel_tol.min(1e-16).ln() - 5.0) / p;
    let mut total = integrate_adaptive(w_min, 0.0, rel_tol * 0.1, |w| {
        let u = w.exp();
        g(u) * u
    })?;
    // [1, ∞): geometric panels.
    let mut lo = 1.0_f64;
    let mut grew = false;
    for _ in 0..80 {
        let hi = lo * 2.0;
        let panel = integrate_adaptive(lo, hi, rel_tol * 0.1, &mut g)?;
        total += panel;
        if panel.abs() <= rel_tol * total.abs().max(1e-300) && grew {
            return Ok(total);
        }
        grew = true;
        lo = hi;
    }
    Err(QuadError::Divergent(
        "tail panels on [1, ∞) did not decay".into(),
    ))
}

/// Integrate F against the logarithmic measure d(ln t) over (0, ∞):
/// ∫ F(t) dt/t, evaluated over log-spaced windows.
///
/// Windows [2^k, 2^{k+1}] are summed outward in both directions from t = 1;
/// the integral is declared divergent when window contributions fail to
/// decay at either end.
pub fn integrate_log_measure<F: FnMut(f64) -> f64>(
    rel_tol: f64,
    mut f: F,
) -> Result<f64, QuadError> {
    // Substitute t = e^w: ∫ F(t) d(ln t) = ∫ F(e^w) dw over the real line.
    let mut total = 0.0;
    let ln2 = std::f64::consts::LN_2;
    for (direction, label) in [(1.0, "t → ∞"), (-1.0, "t → 0")] {
        let mut small_streak = 0;
        let mut converged = false;
        for k in 0..96 {
            let w0 = direction * k as f64 * ln2;
            let w1 = direction * (k + 1) as f64 * ln2;
            let (lo, hi) = if direction > 0.0 { (w0, w1) } else { (w1, w0) };
            let panel = integrate_adaptive(lo, hi, rel_tol * 0.1, |w| f(w.exp()))?;
            total += panel;
            if panel.abs() <= rel_tol * total.abs().max(1e-300) {
                small_streak += 1;
                if small_streak >= 3 {
                    converged = true;
                    break;
                }
            } else {
                small_streak = 0;
            }
        }
        if !converged {
            return Err(QuadError::Divergent(format!(
                "logarithmic-measure windows do not decay as {label}"
            )));
        }
    }
    Ok(total)
}
