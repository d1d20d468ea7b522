//! Discretized sampling of the parametrization ODE
//! `dx = Y(x) dt + Σ_α X_(α)(x) dz^α` and path-ensemble management.
//!
//! The driving increments Δz^α are independent centered Gaussians with
//! variance (s/2π)·Δt, so the generator of the sampled process is
//! (s/4π) Σ_α (X_(α)·∇)² + Y·∇. The scheme is explicit Euler with the frame
//! evaluated at the left node (Itô convention).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ProblemSpec, TimeGrid};
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("sample count must be at least 1")]
    EmptyBatch,
    #[error("non-finite state at sample {sample}, step {step}: {context}")]
    NonFinite {
        sample: usize,
        step: usize,
        context: String,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

/// An ensemble of sampled paths on a shared time grid.
///
/// Layout: `states[sample * (steps+1) * m + node * m + coord]`, and
/// `increments[sample * steps * d + step * d + alpha]`. Every path starts at
/// `start[sample]` exactly; `v_integrals[sample]` is the trapezoid value of
/// ∫₀^T V(x(t)) dt along the path.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub grid: TimeGrid,
    pub dimension: usize,
    pub frame_size: usize,
    pub starts: Vec<Vec<f64>>,
    pub states: Vec<f64>,
    pub increments: Vec<f64>,
    pub v_integrals: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl PathBatch {
    pub fn samples(&self) -> usize {
        self.starts.len()
    }

    pub fn state(&self, sample: usize, node: usize) -> &[f64] {
        let m = self.dimension;
        let stride = (self.grid.steps + 1) * m;
        &self.states[sample * stride + node * m..sample * stride + node * m + m]
    }

    pub fn endpoint(&self, sample: usize) -> &[f64] {
        self.state(sample, self.grid.steps)
    }

    pub fn increment(&self, sample: usize, step: usize) -> &[f64] {
        let d = self.frame_size;
        let stride = self.grid.steps * d;
        &self.increments[sample * stride + step * d..sample * stride + step * d + d]
    }
}

/// One Euler step of the parametrization ODE. `dz` holds the driving
/// increments for this step.
pub(crate) fn euler_step(problem: &ProblemSpec, x: &mut [f64], dt: f64, dz: &[f64]) {
    let drift = problem.drift.eval(x);
    let mut delta: Vec<f64> = drift.iter().map(|y| y * dt).collect();
    for (alpha, field) in problem.frame.iter().enumerate() {
        let xa = field.eval(x);
        for (di, xi) in delta.iter_mut().zip(&xa) {
            *di += xi * dz[alpha];
        }
    }
    for (xi, di) in x.iter_mut().zip(&delta) {
        *xi += di;
    }
}

/// Standard deviation of one driving increment: √((s/2π)·Δt).
pub(crate) fn increment_std(problem: &ProblemSpec, dt: f64) -> f64 {
    (problem.diffusion_scale / (2.0 * std::f64::consts::PI) * dt).sqrt()
}

fn simulate_one(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    start: &[f64],
    rng: &mut ChaCha8Rng,
    sample: usize,
    states: &mut [f64],
    increments: &mut [f64],
) -> Result<f64, PathError> {
    let m = problem.dimension();
    let d = problem.frame.len();
    let dt = grid.dt();
    let sigma = increment_std(problem, dt);
    let mut x = start.to_vec();
    states[..m].copy_from_slice(&x);
    let mut v_prev = problem.potential.eval(&x);
    let mut v_integral = 0.0;
    for k in 0..grid.steps {
        let dz = &mut increments[k * d..(k + 1) * d];
        for z in dz.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *z = sigma * g;
        }
        euler_step(problem, &mut x, dt, dz);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PathError::NonFinite {
                sample,
                step: k,
                context: "path state".into(),
            });
        }
        let v_next = problem.potential.eval(&x);
        if !v_next.is_finite() {
            return Err(PathError::NonFinite {
                sample,
                step: k,
                context: "potential evaluation".into(),
            });
        }
        v_integral += 0.5 * (v_prev + v_next) * dt;
        v_prev = v_next;
        states[(k + 1) * m..(k + 2) * m].copy_from_slice(&x);
    }
    Ok(v_integral)
}

/// Sample `n` paths from a common start point. Deterministic in
/// `(seed, stream, n, grid)` and independent of the worker count: each sample
/// draws from its own counter-keyed stream.
pub fn sample_paths(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    start: &[f64],
    n: usize,
    seed: u64,
) -> Result<PathBatch, PathError> {
    sample_paths_streamed(problem, grid, start, n, seed, 0)
}

/// As [`sample_paths`], with an explicit stream id so that several batches in
/// one run stay uncorrelated.
pub fn sample_paths_streamed(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    start: &[f64],
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<PathBatch, PathError> {
    let starts = vec![start.to_vec(); n];
    sample_paths_from(problem, grid, &starts, seed, stream)
}

/// Sample one path per entry of `starts` (used by batch concatenation, where
/// the second leg starts at the first leg's endpoints).
pub fn sample_paths_from(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    starts: &[Vec<f64>],
    seed: u64,
    stream: u64,
) -> Result<PathBatch, PathError> {
    if starts.is_empty() {
        return Err(PathError::EmptyBatch);
    }
    let n = starts.len();
    let m = problem.dimension();
    let d = problem.frame.len();
    let state_stride = (grid.steps + 1) * m;
    let inc_stride = grid.steps * d;
    let streams = Streams::new(seed);

    let mut states = vec![0.0; n * state_stride];
    let mut increments = vec![0.0; n * inc_stride];
    let v_integrals: Vec<Result<f64, PathError>> = states
        .par_chunks_mut(state_stride)
        .zip(increments.par_chunks_mut(inc_stride))
        .enumerate()
        .map(|(i, (st, inc))| {
            let mut rng = streams.rng(stream, i as u64);
            simulate_one(problem, grid, &starts[i], &mut rng, i, st, inc)
        })
        .collect();
    let v_integrals = v_integrals.into_iter().collect::<Result<Vec<_>, _>>()?;

    Ok(PathBatch {
        grid: *grid,
        dimension: m,
        frame_size: d,
        starts: starts.to_vec(),
        states,
        increments,
        v_integrals,
        seed,
        stream,
    })
}

/// Splice a second batch onto the endpoints of a first batch.
///
/// The combined batch covers horizon t_b + t_c; its law matches direct
/// sampling at the joint horizon because increments over disjoint windows
/// are independent and the parametrization ODE restarts from the endpoint.
pub fn concat(first: &PathBatch, second: &PathBatch) -> Result<PathBatch, PathError> {
    if second.samples() == 0 {
        return Err(PathError::EmptyBatch);
    }
    if first.samples() != second.samples() {
        return Err(PathError::GridMismatch(format!(
            "sample counts differ: {} vs {}",
            first.samples(),
            second.samples()
        )));
    }
    if first.dimension != second.dimension || first.frame_size != second.frame_size {
        return Err(PathError::GridMismatch(
            "batches have different state/frame dimensions".into(),
        ));
    }
    let dt_first = first.grid.dt();
    let dt_second = second.grid.dt();
    if (dt_first - dt_second).abs() > 1e-12 * dt_first.max(dt_second) {
        return Err(PathError::GridMismatch(format!(
            "time steps differ: {dt_first} vs {dt_second}"
        )));
    }
    for i in 0..first.samples() {
        let end = first.endpoint(i);
        let start = &second.starts[i];
        if end.iter().zip(start).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(PathError::GridMismatch(format!(
                "second batch sample {i} does not start at the first batch endpoint"
            )));
        }
    }

    let m = first.dimension;
    let steps = first.grid.steps + second.grid.steps;
    let grid = TimeGrid {
        horizon: first.grid.horizon + second.grid.horizon,
        steps,
    };
    let n = first.samples();
    let mut states = Vec::with_capacity(n * (steps + 1) * m);
    let mut increments =
        Vec::with_capacity(n * steps * first.frame_size);
    for i in 0..n {
        for k in 0..=first.grid.steps {
            states.extend_from_slice(first.state(i, k));
        }
        // Skip the duplicated junction node.
        for k in 1..=second.grid.steps {
            states.extend_from_slice(second.state(i, k));
        }
        for k in 0..first.grid.steps {
            increments.extend_from_slice(first.increment(i, k));
        }
        for k in 0..second.grid.steps {
            increments.extend_from_slice(second.increment(i, k));
        }
    }
    let v_integrals = first
        .v_integrals
        .iter()
        .zip(&second.v_integrals)
        .map(|(a, b)| a + b)
        .collect();
    Ok(PathBatch {
        grid,
        dimension: m,
        frame_size: first.frame_size,
        starts: first.starts.clone(),
        states,
        increments,
        v_integrals,
        seed: first.seed,
        stream: first.stream,
    })
}

/// Write a batch as CSV with columns `sample,node,t,x1..xm`.
pub fn dump_csv<W: std::io::Write>(batch: &PathBatch, out: &mut W) -> std::io::Result<()> {
    write!(out, "sample,node,t")?;
    for j in 1..=batch.dimension {
        write!(out, ",x{j}")?;
    }
    writeln!(out)?;
    for i in 0..batch.samples() {
        for k in 0..=batch.grid.steps {
            write!(out, "{i},{k},{}", batch.grid.node(k))?;
            for v in batch.state(i, k) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
