//! The semigroup operator U_t and analytic reference propagators.
//!
//! `(U_t g)(x_a)` is the Monte Carlo mean of `g(x(t))·exp(∫₀^t V(x(u)) du)`
//! over sampled paths of the parametrization ODE. The action sign convention
//! `e^{-S}` with `S = πQ − ∫V` makes the potential weight `e^{+∫V}`, so the
//! generator carries +V (the opposite of the usual stochastic convention —
//! dissipative potentials are the V < 0 ones here).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::ProblemSpec;
use crate::paths::{euler_step, increment_std, mean_and_se, PathError};
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagatorError {
    #[error("horizon must be nonnegative (got {0})")]
    NegativeHorizon(f64),
    #[error("analytic propagator requires t > 0 (got {0})")]
    NonPositiveTime(f64),
    #[error(transparent)]
    Sampling(#[from] PathError),
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub horizon: f64,
}

/// Sampling controls shared by the propagator and kernel estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    /// Maximum Euler step; horizons are subdivided to at most this.
    pub dt_max: f64,
    /// Stream id separating independent estimator invocations.
    pub stream: u64,
    /// Pair each sample with its sign-flipped driving noise and average.
    pub antithetic: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            dt_max: 1.0 / 32.0,
            stream: 0,
            antithetic: false,
        }
    }
}

impl McOptions {
    pub fn with_stream(stream: u64) -> Self {
        Self {
            stream,
            ..Self::default()
        }
    }
}

/// Per-sample values of the Feynman–Kac functional at several horizons from
/// one simulation sweep: row r, column j holds g(x(t_j))·exp(∫₀^{t_j} V) for
/// sample r. Columns follow `eval_times` (which must be increasing).
///
/// One path serves every horizon, so column estimates are correlated; any
/// linear functional of a row (such as a time quadrature) still gets an
/// honest standard error from the per-row aggregate.
pub(crate) fn fk_rows<G>(
    problem: &ProblemSpec,
    g: &G,
    x_a: &[f64],
    eval_times: &[f64],
    n: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<Vec<f64>, PathError>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if n == 0 {
        return Err(PathError::EmptyBatch);
    }
    debug_assert!(eval_times.windows(2).all(|w| w[0] < w[1]));
    // Union grid: eval times plus uniform refinement to dt_max.
    let mut grid = Vec::with_capacity(eval_times.len() * 2);
    let mut prev = 0.0;
    for &t in eval_times {
        let gap = t - prev;
        if gap <= 0.0 {
            continue;
        }
        let pieces = (gap / opts.dt_max).ceil().max(1.0) as usize;
        for k in 1..=pieces {
            grid.push(prev + gap * k as f64 / pieces as f64);
        }
        // Snap the final node of the window to the exact eval time.
        *grid.last_mut().unwrap() = t;
        prev = t;
    }
    let eval_index: Vec<usize> = eval_times
        .iter()
        .map(|t| grid.iter().position(|g| (g - t).abs() < 1e-15).expect("eval time on grid"))
        .collect();

    let streams = Streams::new(seed);
    let cols = eval_times.len();
    let draws = if opts.antithetic { n.div_ceil(2) } else { n };
    let rows: Vec<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(opts.stream, i as u64);
            if opts.antithetic {
                let a = walk_one(problem, g, x_a, &grid, &eval_index, &mut rng, false)?;
                let mut rng2 = streams.rng(opts.stream, i as u64);
                let b = walk_one(problem, g, x_a, &grid, &eval_index, &mut rng2, true)?;
                Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
            } else {
                walk_one(problem, g, x_a, &grid, &eval_index, &mut rng, false)
            }
        })
        .collect::<Result<_, PathError>>()?;

    let mut flat = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        flat.extend_from_slice(&r);
    }
    Ok(flat)
}

fn walk_one<G>(
    problem: &ProblemSpec,
    g: &G,
    x_a: &[f64],
    grid: &[f64],
    eval_index: &[usize],
    rng: &mut ChaCha8Rng,
    flip: bool,
) -> Result<Vec<f64>, PathError>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let d = problem.frame.len();
    let mut x = x_a.to_vec();
    let mut v_prev = problem.potential.eval(&x);
    let mut v_int = 0.0;
    let mut out = Vec::with_capacity(eval_index.len());
    let mut next_eval = 0;
    let mut t_prev = 0.0;
    let mut dz = vec![0.0; d];
    let sign = if flip { -1.0 } else { 1.0 };
    for (k, &t) in grid.iter().enumerate() {
        let dt = t - t_prev;
        let sigma = increment_std(problem, dt);
        for z in dz.iter_mut() {
            let gauss: f64 = rng.sample(StandardNormal);
            *z = sign * sigma * gauss;
        }
        euler_step(problem, &mut x, dt, &dz);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PathError::NonFinite {
                sample: 0,
                step: k,
                context: "propagated state".into(),
            });
        }
        let v_next = problem.potential.eval(&x);
        if !v_next.is_finite() {
            return Err(PathError::NonFinite {
                sample: 0,
                step: k,
                context: "potential".into(),
            });
        }
        v_int += 0.5 * (v_prev + v_next) * dt;
        v_prev = v_next;
        t_prev = t;
        while next_eval < eval_index.len() && eval_index[next_eval] == k {
            out.push(g(&x) * v_int.exp());
            next_eval += 1;
        }
    }
    Ok(out)
}

/// `(U_t g)(x_a)`: the Feynman–Kac mean at horizon t. At t = 0 the value is
/// g(x_a) exactly with zero standard error.
pub fn propagate<G>(
    problem: &ProblemSpec,
    g: &G,
    x_a: &[f64],
    t: f64,
    n: usize,
    seed: u64,
) -> Result<PropagatorEstimate, PropagatorError>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    propagate_with(problem, g, x_a, t, n, seed, &McOptions::default())
}

/// [`propagate`] with explicit sampling options.
pub fn propagate_with<G>(
    problem: &ProblemSpec,
    g: &G,
    x_a: &[f64],
    t: f64,
    n: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<PropagatorEstimate, PropagatorError>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if t < 0.0 {
        return Err(PropagatorError::NegativeHorizon(t));
    }
    if t == 0.0 {
        return Ok(PropagatorEstimate {
            value: g(x_a),
            std_error: 0.0,
            samples: n,
            horizon: 0.0,
        });
    }
    let rows = fk_rows(problem, g, x_a, &[t], n, seed, opts)?;
    let (value, std_error) = mean_and_se(&rows);
    Ok(PropagatorEstimate {
        value,
        std_error,
        samples: rows.len(),
        horizon: t,
    })
}

/// Closed-form reference propagators for the oracle layer, all for the
/// generator ½Δ (plus the indicated potential).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticPropagator {
    /// (2πt)^{-m/2} exp(−|x−y|²/2t) on ℝ^m.
    FreeHeat,
    /// Absorbing boundary at 0 on the half-line x > 0 via the image method.
    HalfLineImage,
    /// ½Δ − ½ω²x² on ℝ (Mehler kernel).
    HarmonicOscillator { omega: f64 },
}

impl AnalyticPropagator {
    pub fn density(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64, PropagatorError> {
        if t <= 0.0 {
            return Err(PropagatorError::NonPositiveTime(t));
        }
        match self {
            AnalyticPropagator::FreeHeat => {
                let m = x.len() as f64;
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok((2.0 * std::f64::consts::PI * t).powf(-0.5 * m) * (-r2 / (2.0 * t)).exp())
            }
            AnalyticPropagator::HalfLineImage => {
                let free = AnalyticPropagator::FreeHeat;
                let direct = free.density(t, x, y)?;
                let mirrored = free.density(t, x, &[-y[0]])?;
                Ok(direct - mirrored)
            }
            AnalyticPropagator::HarmonicOscillator { omega } => {
                let w = *omega;
                let (xx, yy) = (x[0], y[0]);
                let sh = (w * t).sinh();
                let ch = (w * t).cosh();
                let norm = (w / (2.0 * std::f64::consts::PI * sh)).sqrt();
                Ok(norm * (-(w * ((xx * xx + yy * yy) * ch - 2.0 * xx * yy)) / (2.0 * sh)).exp())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Domain, ExitTimeStrategy, ScalarField, Shape, TimeGrid, VectorField,
    };
    use crate::paths::{concat, sample_paths_from, sample_paths_streamed};
    use approx::assert_relative_eq;

    fn free_problem() -> ProblemSpec {
        ProblemSpec {
            domain: Domain::new(1, Shape::FullSpace).unwrap(),
            frame: vec![VectorField::scaled_axis(
                1,
                0,
                (2.0 * std::f64::consts::PI).sqrt(),
            )],
            drift: VectorField::zero(1),
            potential: ScalarField::zero(),
            source: ScalarField::zero(),
            boundary_data: ScalarField::zero(),
            diffusion_scale: 1.0,
            exit_strategy: ExitTimeStrategy::StochasticBaseline,
        }
    }

    #[test]
    fn free_second_moment_matches_variance() {
        let p = free_problem();
        let est = propagate(&p, &|x: &[f64]| x[0] * x[0], &[0.0], 1.0, 100_000, 21).unwrap();
        assert!(
            (est.value - 1.0).abs() <= 4.0 * est.std_error,
            "got {} ± {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn constant_potential_weight_is_exact() {
        let mut p = free_problem();
        let c = 0.8;
        p.potential = ScalarField::constant(-c);
        let t = 0.6;
        let est = propagate(&p, &|_: &[f64]| 1.0, &[0.2], t, 256, 5).unwrap();
        // The weight is path-independent, so every sample equals e^{-ct}.
        assert_relative_eq!(est.value, (-c * t).exp(), max_relative = 1e-12);
        assert!(est.std_error < 1e-14);
    }

    #[test]
    fn zero_horizon_is_exact() {
        let p = free_problem();
        let est = propagate(&p, &|x: &[f64]| x[0].powi(3) - 2.0, &[1.5], 0.0, 10, 0).unwrap();
        assert_eq!(est.value, 1.5f64.powi(3) - 2.0);
        assert_eq!(est.std_error, 0.0);
        assert!(propagate(&p, &|_: &[f64]| 1.0, &[0.0], -0.1, 10, 0).is_err());
    }

    #[test]
    fn analytic_propagator_fixtures() {
        let free = AnalyticPropagator::FreeHeat;
        assert_relative_eq!(
            free.density(1.0, &[0.3], &[0.3]).unwrap(),
            (2.0 * std::f64::consts::PI).powf(-0.5),
            max_relative = 1e-14
        );
        let half = AnalyticPropagator::HalfLineImage;
        // Antisymmetry puts a zero on the boundary point y = 0.
        assert_relative_eq!(half.density(0.5, &[1.0], &[0.0]).unwrap(), 0.0);
        assert!(half.density(0.5, &[1.0], &[1.0]).unwrap() > 0.0);
        // ω → 0 degenerates to the free kernel.
        let osc = AnalyticPropagator::HarmonicOscillator { omega: 1e-6 };
        let a = osc.density(0.5, &[0.4], &[-0.2]).unwrap();
        let b = free.density(0.5, &[0.4], &[-0.2]).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        assert!(free.density(0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn antithetic_pairing_stays_unbiased() {
        let p = free_problem();
        let opts = McOptions {
            antithetic: true,
            ..McOptions::default()
        };
        let est =
            propagate_with(&p, &|x: &[f64]| x[0] * x[0], &[0.0], 1.0, 40_000, 3, &opts).unwrap();
        assert_eq!(est.samples, 20_000, "pairs count as one draw");
        assert!(
            (est.value - 1.0).abs() <= 4.0 * est.std_error,
            "antithetic estimate {} ± {}",
            est.value,
            est.std_error
        );
        // Odd moments cancel exactly within each pair for the free problem.
        let est = propagate_with(&p, &|x: &[f64]| x[0], &[0.0], 1.0, 2_000, 3, &opts).unwrap();
        assert!(est.value.abs() < 1e-14, "odd moment {}", est.value);
    }

    #[test]
    fn semigroup_composition_within_monte_carlo_error() {
        let mut problems = vec![free_problem()];
        let mut drifted = free_problem();
        drifted.drift = VectorField::constant(vec![0.4]);
        problems.push(drifted);
        let n = 100_000;
        let (t1, t2) = (0.3, 0.5);
        let observables: Vec<(&str, fn(&[f64]) -> f64)> = vec![
            ("1", |_x| 1.0),
            ("x", |x| x[0]),
            ("x^2", |x| x[0] * x[0]),
        ];
        for p in &problems {
            // Shared dt = 0.0125 so the legs splice.
            let grid1 = TimeGrid::new(t1, 24).unwrap();
            let grid2 = TimeGrid::new(t2, 40).unwrap();
            let first = sample_paths_streamed(p, &grid1, &[0.1], n, 31, 0).unwrap();
            let ends: Vec<Vec<f64>> = (0..n).map(|i| first.endpoint(i).to_vec()).collect();
            let second = sample_paths_from(p, &grid2, &ends, 31, 1).unwrap();
            let joined = concat(&first, &second).unwrap();
            for (name, g) in &observables {
                let direct = propagate(p, g, &[0.1], t1 + t2, n, 77).unwrap();
                let composed: Vec<f64> = (0..n)
                    .map(|i| g(joined.endpoint(i)) * joined.v_integrals[i].exp())
                    .collect();
                let (comp_mean, comp_se) = mean_and_se(&composed);
                let tol = 4.0 * (direct.std_error.hypot(comp_se));
                assert!(
                    (direct.value - comp_mean).abs() <= tol.max(1e-12),
                    "g = {name}: direct {} vs composed {comp_mean} (tol {tol})",
                    direct.value
                );
            }
        }
    }

    #[test]
    fn generator_commutes_with_propagator_on_free_problem() {
        // For g = x² on the free problem, U_t g = x² + t exactly, so
        // ∂_t U_t g = 1 and L U_t g = 1. Check both sides numerically with
        // common random numbers tying the estimates together.
        let p = free_problem();
        let g = |x: &[f64]| x[0] * x[0];
        let n = 100_000;
        let x0 = 0.3;
        let t = 0.5;
        let h = 1e-2;
        let opts = McOptions {
            dt_max: h / 4.0,
            stream: 9,
            antithetic: false,
        };
        let up = propagate_with(&p, &g, &[x0], t + h, n, 13, &opts).unwrap();
        let dn = propagate_with(&p, &g, &[x0], t - h, n, 13, &opts).unwrap();
        let time_deriv = (up.value - dn.value) / (2.0 * h);
        let dt_se = up.std_error.hypot(dn.std_error) / (2.0 * h);

        // Spatial side: same streams at shifted starts; for the free problem
        // the second difference of translated paths is deterministic.
        let hx = 1e-2;
        let at = |x: f64| propagate_with(&p, &g, &[x], t, n, 13, &opts).unwrap();
        let (fp, f0, fm) = (at(x0 + hx), at(x0), at(x0 - hx));
        let second = (fp.value - 2.0 * f0.value + fm.value) / (hx * hx);
        let l_value = 0.5 * second;
        let tol = 4.0 * dt_se + 1e-3;
        assert!(
            (time_deriv - l_value).abs() <= tol,
            "∂_t U_t g = {time_deriv} vs L U_t g = {l_value} (tol {tol})"
        );
    }
}
