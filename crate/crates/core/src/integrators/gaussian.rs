//! The one-parameter Gaussian integrator family.
//!
//! A spec (s, W) reduces k linear forms to the ordinary Gaussian measure with
//! covariance (s/2π)·W: normalization 1, mean 0, and pairwise covariance
//! (s/2π)·W(x'_i, x'_j). Translation invariance shows up infinitesimally as
//! the integration-by-parts (Stein) identity
//! E[∇F(u)] = (2π/s)·W⁻¹·E[u·F(u)].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::IntegratorError;
use crate::quad::GaussLegendre;
use crate::rng::Streams;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Parameters of one Gaussian integrator over k chosen linear forms.
///
/// `w` is the matrix of pairings W(x'_i, x'_j); its inverse realizes the
/// quadratic form Q on the reduced space.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    s: f64,
    w: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl GaussianSpec {
    /// Build a spec, checking W for symmetry and positive-definiteness and
    /// precomputing Q = W⁻¹ (validated to Q·W = I within 1e-10).
    pub fn new(s: f64, w: DMatrix<f64>) -> Result<Self, IntegratorError> {
        if s <= 0.0 {
            return Err(IntegratorError::ParameterDomain(format!(
                "diffusion scale must satisfy Re(s) > 0 (got {s})"
            )));
        }
        if w.nrows() != w.ncols() {
            return Err(IntegratorError::NonPositiveDefinite);
        }
        let sym_err = (&w - w.transpose()).abs().max();
        if sym_err > 1e-10 * w.abs().max().max(1.0) {
            return Err(IntegratorError::NonPositiveDefinite);
        }
        let chol = w.clone().cholesky().ok_or(IntegratorError::NonPositiveDefinite)?;
        let q = chol.inverse();
        let residual = (&q * &w - DMatrix::identity(w.nrows(), w.ncols()))
            .abs()
            .max();
        if residual > 1e-10 {
            return Err(IntegratorError::NonPositiveDefinite);
        }
        Ok(Self { s, w, q })
    }

    /// 1-D convenience constructor.
    pub fn scalar(s: f64, w: f64) -> Result<Self, IntegratorError> {
        Self::new(s, DMatrix::from_element(1, 1, w))
    }

    /// Construct from a row-major k×k covariance slice.
    pub fn from_rows(s: f64, k: usize, rows: &[f64]) -> Result<Self, IntegratorError> {
        Self::new(s, DMatrix::from_row_slice(k, k, rows))
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Covariance of the reduced Gaussian measure: (s/2π)·W.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.w.scale(self.s / TWO_PI)
    }
}

/// Reduce ∫ F(⟨x'_1,x⟩,…,⟨x'_k,x⟩) Dω_s(x) to a k-dimensional Gaussian
/// integral with covariance (s/2π)·W and evaluate it by tensorized
/// Gauss–Legendre quadrature in the principal axes of W.
///
/// Axis orders double until two successive estimates agree to 1e-11
/// relative; k is capped at 8 by the evaluation budget.
pub fn gaussian_reduce<F>(spec: &GaussianSpec, f: F) -> Result<f64, IntegratorError>
where
    F: Fn(&[f64]) -> f64,
{
    let k = spec.dim();
    if k > 8 {
        return Err(IntegratorError::ParameterDomain(format!(
            "quadrature budget supports at most 8 forms (got {k})"
        )));
    }
    let eig = spec.covariance().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(IntegratorError::NonPositiveDefinite);
    }
    let sigmas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.sqrt()).collect();
    let basis = eig.eigenvectors;

    // Budget: keep total evaluations under ~2^21 while doubling orders.
    let max_order = match k {
        1 => 2048,
        2 => 512,
        3 => 128,
        _ => 32,
    };
    let mut order = 16usize.min(max_order);
    let mut prev: Option<f64> = None;
    loop {
        let (value, scale) = tensor_gauss(&sigmas, &basis, order, &f);
        if let Some(p) = prev {
            if (value - p).abs() <= 1e-11 * value.abs() + 1e-13 * scale {
                return Ok(value);
            }
        }
        if order >= max_order {
            if let Some(p) = prev {
                let change = (value - p).abs();
                if change <= 1e-8 * value.abs() + 1e-10 * scale {
                    return Ok(value);
                }
            }
            return Err(IntegratorError::Quadrature(
                crate::quad::QuadError::NoConvergence {
                    tol: 1e-11,
                    last: value,
                },
            ));
        }
        prev = Some(value);
        order *= 2;
    }
}

fn tensor_gauss<F>(sigmas: &[f64], basis: &DMatrix<f64>, order: usize, f: &F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let k = sigmas.len();
    let rule = GaussLegendre::new(order);
    // Integrate each principal axis over ±10σ against its 1-D normal density.
    let axes: Vec<Vec<(f64, f64)>> = sigmas
        .iter()
        .map(|&sigma| {
            rule.mapped(-10.0 * sigma, 10.0 * sigma)
                .into_iter()
                .map(|(v, w)| {
                    let density =
                        (-0.5 * v * v / (sigma * sigma)).exp() / (sigma * (TWO_PI).sqrt());
                    (v, w * density)
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; k];
    let mut acc = 0.0;
    let mut acc_abs = 0.0;
    let mut v = vec![0.0; k];
    let mut u = vec![0.0; k];
    loop {
        let mut weight = 1.0;
        for (axis, &i) in idx.iter().enumerate() {
            let (val, w) = axes[axis][i];
            v[axis] = val;
            weight *= w;
        }
        // Rotate back: u = B·v.
        for r in 0..k {
            u[r] = (0..k).map(|c| basis[(r, c)] * v[c]).sum();
        }
        let fv = f(&u);
        acc += weight * fv;
        acc_abs += weight.abs() * fv.abs();
        // Odometer increment.
        let mut carry = 0;
        loop {
            idx[carry] += 1;
            if idx[carry] < axes[carry].len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
            if carry == k {
                return (acc, acc_abs);
            }
        }
    }
}

/// Brownian covariance of the driving forms: (s/2π)·δ^{αβ}·min(t, u) as a
/// d×d matrix. The Green's function of the pinned-left/free-right
/// second-derivative operator on [0, T] is min(t, u), which fixes this form.
pub fn gaussian_covariance(
    s: f64,
    dim: usize,
    t: f64,
    u: f64,
) -> Result<DMatrix<f64>, IntegratorError> {
    if t < 0.0 || u < 0.0 {
        return Err(IntegratorError::ParameterDomain(format!(
            "times must be nonnegative (got {t}, {u})"
        )));
    }
    Ok(DMatrix::identity(dim, dim).scale(s / TWO_PI * t.min(u)))
}

/// Monte Carlo check of the integration-by-parts identity.
#[derive(Debug, Clone)]
pub struct SteinResidual {
    /// Componentwise E[∇F] − (2π/s)·W⁻¹·E[u·F(u)].
    pub residual: Vec<f64>,
    /// Standard error of each residual component.
    pub std_error: Vec<f64>,
    pub samples: usize,
}

impl SteinResidual {
    /// Largest |residual| / SE ratio over components.
    pub fn max_sigma_ratio(&self) -> f64 {
        self.residual
            .iter()
            .zip(&self.std_error)
            .map(|(r, se)| if *se > 0.0 { r.abs() / se } else { r.abs() })
            .fold(0.0, f64::max)
    }
}

/// Estimate E[∇F(u)] − (2π/s)·W⁻¹·E[u·F(u)] under u ~ N(0, (s/2π)W).
///
/// The gradient is taken by central differences. Requires a budget of at
/// least 10³ samples.
pub fn gaussian_stein_residual<F>(
    spec: &GaussianSpec,
    f: F,
    samples: usize,
    seed: u64,
) -> Result<SteinResidual, IntegratorError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if samples < 1_000 {
        return Err(IntegratorError::BudgetTooSmall(samples, 1_000));
    }
    let k = spec.dim();
    let chol = spec
        .covariance()
        .cholesky()
        .ok_or(IntegratorError::NonPositiveDefinite)?;
    let l = chol.l();
    let scale = TWO_PI / spec.s;
    let streams = Streams::new(seed);

    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(0, i as u64);
            let g = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let u = &l * g;
            let u_slice: Vec<f64> = u.iter().copied().collect();
            let fu = f(&u_slice);
            let qu = spec.q() * &u;
            let mut row = Vec::with_capacity(k);
            let mut probe = u_slice.clone();
            for j in 0..k {
                let h = 1e-5 * (1.0 + u_slice[j].abs());
                probe[j] = u_slice[j] + h;
                let fp = f(&probe);
                probe[j] = u_slice[j] - h;
                let fm = f(&probe);
                probe[j] = u_slice[j];
                let grad_j = (fp - fm) / (2.0 * h);
                row.push(grad_j - scale * qu[j] * fu);
            }
            row
        })
        .collect();

    let n = samples as f64;
    let mut residual = vec![0.0; k];
    let mut std_error = vec![0.0; k];
    for j in 0..k {
        let mean = per_sample.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = per_sample
            .iter()
            .map(|r| (r[j] - mean) * (r[j] - mean))
            .sum::<f64>()
            / (n - 1.0);
        residual[j] = mean;
        std_error[j] = (var / n).sqrt();
    }
    Ok(SteinResidual {
        residual,
        std_error,
        samples,
    })
}
