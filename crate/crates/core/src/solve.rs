//! Full solution assembly Ψ = (interior kernel applied to f) + (boundary
//! kernel applied to the boundary data), mean exit times, grid operator
//! residuals, and Nyström eigenvalues of the Dirichlet kernel.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::critical::exit_profile;
use crate::kernels::{
    baseline_batch, dirichlet_apply, dirichlet_boundary_apply, kernel_density, neumann_apply,
    neumann_boundary_apply, DensityGrid, KernelConfig, KernelError,
};
use crate::model::{ExitTimeStrategy, ProblemSpec, ScalarField, Shape};
use crate::paths::mean_and_se;
use crate::quad::GaussLegendre;
use crate::rng::job_id;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Critical(#[from] crate::critical::CriticalError),
    #[error("grid too coarse: spacing {h} exceeds an eighth of the domain extent {extent}")]
    GridTooCoarse { h: f64, extent: f64 },
    #[error("Nyström node count {0} below the minimum of 16")]
    NodeCountBelowMinimum(usize),
    #[error("eigen solve supported on interval domains only (got {0})")]
    UnsupportedEigenDomain(String),
    #[error("solution field and grid sizes disagree: {0} values for {1} nodes")]
    FieldGridMismatch(usize, usize),
}

/// One evaluated point of a solution field.
#[derive(Debug, Clone, Serialize)]
pub struct PointSolution {
    pub point: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    /// Interior (source-kernel) part of the value.
    pub interior: f64,
    /// Boundary (data-kernel) part of the value.
    pub boundary: f64,
    /// One solution per critical-exit candidate when several τ⊥ tie;
    /// `value` is the minimal-τ⊥ entry. Empty when the candidate is unique.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alternates: Vec<(f64, f64)>,
}

/// A solution field over evaluation points.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionField {
    pub points: Vec<PointSolution>,
    pub problem_hash: u64,
    pub seed: u64,
    pub samples: usize,
    pub mode: String,
    /// Neumann solutions are defined only up to an additive constant.
    pub additive_constant_ambiguity: bool,
}

/// Fingerprint of the problem structure for run manifests: domain shape and
/// parameters, strategy, diffusion scale, frame size.
pub fn problem_fingerprint(problem: &ProblemSpec) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    format!("{:?}", problem.domain.shape()).hash(&mut h);
    format!("{:?}", problem.exit_strategy).hash(&mut h);
    problem.diffusion_scale.to_bits().hash(&mut h);
    problem.frame.len().hash(&mut h);
    problem.dimension().hash(&mut h);
    h.finish()
}

fn mode_name(problem: &ProblemSpec) -> String {
    match problem.exit_strategy {
        ExitTimeStrategy::CriticalDistance { speed } => format!("critical-distance(c={speed})"),
        ExitTimeStrategy::FixedEnergy { energy } => format!("fixed-energy(E={energy})"),
        ExitTimeStrategy::StochasticBaseline => "baseline".into(),
    }
}

/// Solve the Dirichlet problem at the given points.
///
/// Boundary points return φ exactly; interior points decompose into the
/// interior and boundary kernel applications. In critical modes with several
/// tied exit candidates, one solution per candidate is reported in
/// `alternates`.
pub fn solve_dirichlet(
    problem: &ProblemSpec,
    points: &[Vec<f64>],
    n: usize,
    seed: u64,
) -> Result<SolutionField, SolveError> {
    let cfg = KernelConfig::default();
    solve_dirichlet_with(problem, points, n, seed, &cfg)
}

pub fn solve_dirichlet_with(
    problem: &ProblemSpec,
    points: &[Vec<f64>],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<SolutionField, SolveError> {
    let solutions: Vec<PointSolution> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| solve_dirichlet_point(problem, x, n, seed, cfg, i as u64))
        .collect::<Result<_, SolveError>>()?;
    Ok(SolutionField {
        points: solutions,
        problem_hash: problem_fingerprint(problem),
        seed,
        samples: n,
        mode: mode_name(problem),
        additive_constant_ambiguity: false,
    })
}

fn solve_dirichlet_point(
    problem: &ProblemSpec,
    x: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
    point_index: u64,
) -> Result<PointSolution, SolveError> {
    // Boundary evaluation points are exact.
    if problem.domain.has_boundary() && problem.domain.signed_distance(x).abs() < 1e-12 {
        let phi = problem.boundary_data.eval(x);
        return Ok(PointSolution {
            point: x.to_vec(),
            value: phi,
            std_error: 0.0,
            interior: 0.0,
            boundary: phi,
            alternates: Vec::new(),
        });
    }
    let base_stream = job_id(point_index);
    if matches!(problem.exit_strategy, ExitTimeStrategy::StochasticBaseline) {
        let cfg_pt = KernelConfig {
            stream: base_stream,
            ..*cfg
        };
        let outcomes = baseline_batch(problem, x, n, seed, &cfg_pt)?;
        let totals: Vec<f64> = outcomes.iter().map(|o| o.interior + o.boundary).collect();
        let (value, std_error) = mean_and_se(&totals);
        let interior = outcomes.iter().map(|o| o.interior).sum::<f64>() / n as f64;
        let boundary = outcomes.iter().map(|o| o.boundary).sum::<f64>() / n as f64;
        return Ok(PointSolution {
            point: x.to_vec(),
            value,
            std_error,
            interior,
            boundary,
            alternates: Vec::new(),
        });
    }
    // Critical modes: one solution per exit candidate.
    let profile = exit_profile(problem, x)?;
    let mut per_candidate = Vec::with_capacity(profile.candidates.len());
    for (ci, _) in profile.candidates.iter().enumerate() {
        let cfg_pt = KernelConfig {
            stream: job_id(point_index ^ (ci as u64) << 48),
            ..*cfg
        };
        // All candidates share τ⊥ for the built-in shapes, so the same
        // quadrature applies; the interior part is identical and only the
        // boundary propagation differs through its horizon (equal here).
        let interior = dirichlet_apply(problem, x, n, seed, &cfg_pt)?;
        let boundary = dirichlet_boundary_apply(problem, x, n, seed.wrapping_add(1), &cfg_pt)?;
        per_candidate.push((interior, boundary));
    }
    let (interior, boundary) = &per_candidate[0];
    let value = interior.value + boundary.value;
    let std_error = interior.std_error.hypot(boundary.std_error);
    let alternates = per_candidate
        .iter()
        .skip(1)
        .map(|(i, b)| (i.value + b.value, i.std_error.hypot(b.std_error)))
        .collect();
    Ok(PointSolution {
        point: x.to_vec(),
        value,
        std_error,
        interior: interior.value,
        boundary: boundary.value,
        alternates,
    })
}

/// Solve the Neumann problem Ψ = ∫K^(N) f + ∫K_∂^(N) ψ at the given points,
/// with ψ taken from the problem's boundary data. The result is defined up
/// to an additive constant, which is flagged in the field metadata.
pub fn solve_neumann(
    problem: &ProblemSpec,
    points: &[Vec<f64>],
    n: usize,
    seed: u64,
) -> Result<SolutionField, SolveError> {
    let cfg = KernelConfig::default();
    match problem.domain.shape() {
        Shape::Interval { .. } | Shape::HalfSpace { .. } | Shape::Ball { .. } => {}
        other => {
            return Err(SolveError::Kernel(KernelError::UnsupportedDomain(format!(
                "Neumann solve supports interval/half-space/ball (got {other:?})"
            ))))
        }
    }
    let solutions: Vec<PointSolution> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let cfg_pt = KernelConfig {
                stream: job_id(i as u64),
                ..cfg
            };
            let volume = neumann_apply(problem, x, n, seed, &cfg_pt)?;
            let boundary = neumann_boundary_apply(
                problem,
                x,
                &problem.boundary_data,
                n,
                seed.wrapping_add(1),
                &cfg_pt,
            )?;
            Ok(PointSolution {
                point: x.clone(),
                value: volume.value + boundary.value,
                std_error: volume.std_error.hypot(boundary.std_error),
                interior: volume.value,
                boundary: boundary.value,
                alternates: Vec::new(),
            })
        })
        .collect::<Result<_, SolveError>>()?;
    Ok(SolutionField {
        points: solutions,
        problem_hash: problem_fingerprint(problem),
        seed,
        samples: n,
        mode: mode_name(problem),
        additive_constant_ambiguity: true,
    })
}

/// Mean exit time: the Dirichlet solve specialized to f ≡ 1, φ ≡ 0.
///
/// In baseline mode this is the classical expected first-exit time; in
/// critical-distance mode it equals τ⊥(x) deterministically.
pub fn mean_exit_time(
    problem: &ProblemSpec,
    x: &[f64],
    n: usize,
    seed: u64,
) -> Result<PointSolution, SolveError> {
    let mut specialized = problem.clone();
    specialized.source = ScalarField::constant(1.0);
    specialized.boundary_data = ScalarField::zero();
    let field = solve_dirichlet(&specialized, &[x.to_vec()], n, seed)?;
    Ok(field.points.into_iter().next().expect("one point"))
}

/// Residuals LΨ + f of a gridded solution field.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualGrid {
    /// Interior grid points with enough margin for the two-pass stencil.
    pub points: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub median_abs: f64,
}

/// Assemble LΨ + f on a regular grid by nested directional differences:
/// (X_α·∇)² as two central-difference passes, Y·∇ as one, plus VΨ + f.
/// Exact for quadratic fields under constant frames.
pub fn operator_residual(
    problem: &ProblemSpec,
    grid: &DensityGrid,
    values: &[f64],
) -> Result<ResidualGrid, SolveError> {
    let m = grid.lo.len();
    let total: usize = grid.bins.iter().product();
    if values.len() != total {
        return Err(SolveError::FieldGridMismatch(values.len(), total));
    }
    let spacing: Vec<f64> = (0..m)
        .map(|i| (grid.hi[i] - grid.lo[i]) / grid.bins[i] as f64)
        .collect();
    for i in 0..m {
        let extent = grid.hi[i] - grid.lo[i];
        if spacing[i] > extent / 8.0 {
            return Err(SolveError::GridTooCoarse {
                h: spacing[i],
                extent,
            });
        }
    }
    let coords = |flat: usize| -> Vec<usize> {
        let mut idx = flat;
        let mut c = vec![0usize; m];
        for i in (0..m).rev() {
            c[i] = idx % grid.bins[i];
            idx /= grid.bins[i];
        }
        c
    };
    let flat = |c: &[usize]| -> usize {
        let mut idx = 0;
        for i in 0..m {
            idx = idx * grid.bins[i] + c[i];
        }
        idx
    };
    let point = |c: &[usize]| -> Vec<f64> {
        (0..m)
            .map(|i| grid.lo[i] + (c[i] as f64 + 0.5) * spacing[i])
            .collect()
    };

    // First pass: per-axis central differences of Ψ.
    let axis_diff = |field: &[f64], axis: usize, c: &[usize]| -> Option<f64> {
        if c[axis] == 0 || c[axis] + 1 >= grid.bins[axis] {
            return None;
        }
        let mut up = c.to_vec();
        up[axis] += 1;
        let mut dn = c.to_vec();
        dn[axis] -= 1;
        Some((field[flat(&up)] - field[flat(&dn)]) / (2.0 * spacing[axis]))
    };
    let directional = |field: &[f64], c: &[usize], v: &[f64]| -> Option<f64> {
        let mut acc = 0.0;
        for axis in 0..m {
            if v[axis] != 0.0 {
                acc += v[axis] * axis_diff(field, axis, c)?;
            }
        }
        Some(acc)
    };

    // Intermediate grids g_α = X_α·∇Ψ everywhere the stencil fits.
    let mut frame_grids: Vec<Vec<f64>> = Vec::with_capacity(problem.frame.len());
    for xf in &problem.frame {
        let g: Vec<f64> = (0..total)
            .map(|i| {
                let c = coords(i);
                let p = point(&c);
                directional(values, &c, &xf.eval(&p)).unwrap_or(f64::NAN)
            })
            .collect();
        frame_grids.push(g);
    }

    let scale = problem.diffusion_scale / (4.0 * std::f64::consts::PI);
    let mut points = Vec::new();
    let mut residuals = Vec::new();
    for i in 0..total {
        let c = coords(i);
        // Need a 2-cell margin for the nested pass.
        if (0..m).any(|a| c[a] < 2 || c[a] + 2 > grid.bins[a] - 1) {
            continue;
        }
        let p = point(&c);
        let mut second = 0.0;
        let mut ok = true;
        for (alpha, xf) in problem.frame.iter().enumerate() {
            match directional(&frame_grids[alpha], &c, &xf.eval(&p)) {
                Some(v) if v.is_finite() => second += v,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let drift = match directional(values, &c, &problem.drift.eval(&p)) {
            Some(v) => v,
            None => continue,
        };
        let l_psi = scale * second + drift + problem.potential.eval(&p) * values[i];
        points.push(p.clone());
        residuals.push(l_psi + problem.source.eval(&p));
    }
    let mut sorted: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max_abs = sorted.last().copied().unwrap_or(0.0);
    let median_abs = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    Ok(ResidualGrid {
        points,
        residuals,
        max_abs,
        median_abs,
    })
}

/// Where the Nyström kernel samples come from.
pub enum EigenKernel<'a> {
    /// The closed-form Green's function of (s/4π)X²∂² with Dirichlet data on
    /// the problem's interval.
    AnalyticInterval { problem: &'a ProblemSpec },
    /// Monte Carlo kernel rows estimated by binned densities.
    Estimated {
        problem: &'a ProblemSpec,
        samples: usize,
        seed: u64,
    },
}

/// Ordered eigenvalue estimates of LΨ = −λ... in the Fredholm form
/// Ψ = λ∫K_U^(D)Ψ: λ_i are reciprocals of the kernel-operator eigenvalues.
#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub nodes: usize,
    pub kernel_source: String,
}

/// Interval diffusion coefficient D in L = D·d²/dx² for a 1-D problem with a
/// constant frame.
fn interval_diffusion(problem: &ProblemSpec) -> f64 {
    let x0 = problem.domain.reference_interior_point();
    let xval = problem.frame[0].eval(&x0)[0];
    problem.diffusion_scale / (4.0 * std::f64::consts::PI) * xval * xval
}

/// Nyström eigenvalues of the Dirichlet elementary kernel on an interval:
/// Gauss–Legendre nodes, symmetrized kernel matrix, ascending λ.
pub fn eigen_dirichlet(
    kernel: EigenKernel<'_>,
    q: usize,
    k: usize,
) -> Result<EigenResult, SolveError> {
    if q < 16 {
        return Err(SolveError::NodeCountBelowMinimum(q));
    }
    let (problem, source_tag) = match &kernel {
        EigenKernel::AnalyticInterval { problem } => (*problem, "analytic"),
        EigenKernel::Estimated { problem, .. } => (*problem, "estimated"),
    };
    let (a, b) = match problem.domain.shape() {
        Shape::Interval { a, b } => (*a, *b),
        other => return Err(SolveError::UnsupportedEigenDomain(format!("{other:?}"))),
    };
    let rule = GaussLegendre::new(q);
    let mapped = rule.mapped(a, b);
    let xs: Vec<f64> = mapped.iter().map(|(x, _)| *x).collect();
    let ws: Vec<f64> = mapped.iter().map(|(_, w)| *w).collect();

    let kernel_matrix: Vec<Vec<f64>> = match kernel {
        EigenKernel::AnalyticInterval { .. } => {
            let d = interval_diffusion(problem);
            let len = b - a;
            xs.iter()
                .map(|&x| {
                    xs.iter()
                        .map(|&y| (x.min(y) - a) * (b - x.max(y)) / (d * len))
                        .collect()
                })
                .collect()
        }
        EigenKernel::Estimated {
            problem,
            samples,
            seed,
        } => {
            // One binned-density run per node; bins centered on the nodes of
            // a uniform grid of the same count for a square matrix.
            let grid = DensityGrid::new_1d(a, b, q);
            let cfg = KernelConfig::default();
            let rows: Vec<Vec<f64>> = xs
                .par_iter()
                .enumerate()
                .map(|(i, &x)| {
                    let cfg_pt = KernelConfig {
                        stream: job_id(i as u64),
                        ..cfg
                    };
                    let density = kernel_density(problem, &[x], &grid, samples, seed, &cfg_pt)?;
                    // Resample the binned density at the quadrature nodes.
                    let vals: Vec<f64> = xs
                        .iter()
                        .map(|&y| {
                            density
                                .grid
                                .index_of(&[y])
                                .map(|idx| density.values[idx])
                                .unwrap_or(0.0)
                        })
                        .collect();
                    Ok(vals)
                })
                .collect::<Result<_, SolveError>>()?;
            rows
        }
    };

    // Symmetrized Nyström: B = D^{1/2} K D^{1/2} shares eigenvalues with KD.
    let mut bmat = nalgebra::DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            let sym = 0.5 * (kernel_matrix[i][j] + kernel_matrix[j][i]);
            bmat[(i, j)] = ws[i].sqrt() * sym * ws[j].sqrt();
        }
    }
    let eig = bmat.symmetric_eigen();
    let mut mu: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    mu.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let eigenvalues: Vec<f64> = mu
        .into_iter()
        .filter(|m| *m > 1e-12)
        .take(k)
        .map(|m| 1.0 / m)
        .collect();
    Ok(EigenResult {
        eigenvalues,
        nodes: q,
        kernel_source: source_tag.into(),
    })
}
