//! Elementary and boundary kernel functionals in weak (applied-to-field)
//! form, plus a binned pointwise density for inspection.
//!
//! With a deterministic critical exit time τ⊥ the Dirichlet kernels reduce to
//! time quadratures of the semigroup:
//!
//! ```text
//!   (K_U^(D) f)(x_a)  = ∫₀^{τ⊥} (U_t f)(x_a) dt        (vanishes on ∂U)
//!   (K_∂^(D) φ)(x_a)  = (U_{τ⊥} φ)(x_a)                (equals φ on ∂U)
//!   (K_∞   f)(x_a)    = ∫₀^∞   (U_t f)(x_a) dt         (boundary at ∞)
//!   (F_U   f)(x_a)    = ∫_{τ⊥}^∞ (U_t f)(x_a) dt
//! ```
//!
//! so K^(D) = K∞ − F_U and K^(N) = K∞ + F_U. The K∞ tail converges only for
//! dissipative potentials (sup V ≤ −c < 0), which is checked eagerly.
//!
//! In `StochasticBaseline` mode the same operators are estimated by the
//! classical per-path first-exit construction (with Brownian-bridge exit
//! correction), which serves as the externally validated comparator.
//!
//! The Neumann combination uses the σ-transformed realization of F_U (paths
//! started from the boundary-reflected point) on the domains where the
//! reflection is unambiguous; the direct time-integral form is exposed
//! alongside, and the two genuinely differ away from the boundary.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::critical::{exit_profile, CriticalError};
use crate::model::{ProblemSpec, Shape};
use crate::paths::{euler_step, increment_std, mean_and_se, PathError};
use crate::propagator::{fk_rows, propagate_with, McOptions, PropagatorError};
use crate::quad::GaussLegendre;
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Sampling(#[from] PathError),
    #[error("non-dissipative potential: sup V = {0} but the kernel tail requires sup V < 0")]
    NonDissipative(f64),
    #[error("operation requires a deterministic exit-time strategy, not the stochastic baseline")]
    BaselineStrategy,
    #[error("unsupported domain for this kernel: {0}")]
    UnsupportedDomain(String),
    #[error("walk exceeded {0} steps without exiting")]
    WalkBudgetExceeded(usize),
}

/// Tuning knobs for the kernel estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// Gauss–Legendre nodes on [0, τ⊥].
    pub time_nodes: usize,
    /// Euler refinement between quadrature nodes.
    pub dt_max: f64,
    /// Relative tail target for the K∞ / F_U time integrals.
    pub tail_rel_tol: f64,
    /// Trusted dissipation constant c > 0, overriding the probe.
    pub dissipation_override: Option<f64>,
    /// Stream id separating kernel invocations within one run.
    pub stream: u64,
    /// Euler step for baseline (first-exit) walks.
    pub baseline_dt: f64,
    /// Per-sample step budget for baseline walks.
    pub max_steps: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            time_nodes: 32,
            dt_max: 1.0 / 32.0,
            tail_rel_tol: 1e-4,
            dissipation_override: None,
            stream: 0,
            baseline_dt: 5e-4,
            max_steps: 10_000_000,
        }
    }
}

impl KernelConfig {
    pub fn with_stream(stream: u64) -> Self {
        Self {
            stream,
            ..Self::default()
        }
    }
}

/// Recorded K∞/F_U decomposition of a combined kernel value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSplit {
    pub k_infinity: f64,
    pub f_u: f64,
    /// Whether the F_U part came from the σ-transformed (reflected-start)
    /// realization rather than the direct time integral.
    pub reflected: bool,
}

/// A kernel functional estimate with quadrature metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub decomposition: Option<KernelSplit>,
    /// Time-quadrature nodes (empty for purely per-path estimators).
    pub time_nodes: Vec<f64>,
    pub rule: &'static str,
}

impl KernelEstimate {
    fn exact(value: f64, rule: &'static str) -> Self {
        Self {
            value,
            std_error: 0.0,
            samples: 0,
            decomposition: None,
            time_nodes: Vec::new(),
            rule,
        }
    }
}

/// The source as a global section: the direct path constructions evaluate f
/// along free paths wherever they wander (this is what makes U_t 1 = 1 and
/// the constant-potential closed forms exact).
fn global_source(problem: &ProblemSpec) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| problem.source.eval(x)
}

/// The source restricted to U (zero extension): the Neumann combination
/// realizes ∫_U K^(N) f, and the image argument behind its boundary-flux
/// cancellation needs the restriction.
fn masked_source(problem: &ProblemSpec) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| {
        if problem.domain.has_boundary() && problem.domain.signed_distance(x) > 0.0 {
            0.0
        } else {
            problem.source.eval(x)
        }
    }
}

fn is_baseline(problem: &ProblemSpec) -> bool {
    matches!(
        problem.exit_strategy,
        crate::model::ExitTimeStrategy::StochasticBaseline
    )
}

/// Determine the dissipation constant c = −sup V over probe points around
/// the sampling region, or take the configured override.
fn dissipation_constant(
    problem: &ProblemSpec,
    x_a: &[f64],
    cfg: &KernelConfig,
) -> Result<f64, KernelError> {
    if let Some(c) = cfg.dissipation_override {
        return Ok(c);
    }
    let mut sup = f64::NEG_INFINITY;
    for p in problem.domain.interior_probes(64) {
        sup = sup.max(problem.potential.eval(&p));
    }
    // Probe a box around the start point too: free paths leave the domain.
    let m = x_a.len();
    let span = 8.0_f64.max(4.0 * (problem.diffusion_scale).sqrt());
    for corner in 0..(1usize << m.min(6)) {
        let probe: Vec<f64> = (0..m)
            .map(|i| x_a[i] + if corner >> i & 1 == 1 { span } else { -span })
            .collect();
        sup = sup.max(problem.potential.eval(&probe));
    }
    sup = sup.max(problem.potential.eval(x_a));
    if sup >= 0.0 {
        return Err(KernelError::NonDissipative(sup));
    }
    Ok(-sup)
}

/// Gauss–Legendre nodes and weights over [0, τ⊥].
fn dirichlet_nodes(tau: f64, count: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(count).mapped(0.0, tau)
}

/// Geometric panels of Gauss–Legendre rules covering [lo, lo + horizon]:
/// unit panels that double in width, 16 nodes each.
fn tail_nodes(lo: f64, horizon: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(16);
    let mut out = Vec::new();
    let mut a = lo;
    let mut width = 1.0_f64.min(horizon.max(1e-6));
    let end = lo + horizon;
    while a < end {
        let b = (a + width).min(end);
        out.extend(rule.mapped(a, b));
        a = b;
        width *= 2.0;
    }
    out
}

/// Horizon for the K∞ tail: e^{-cT} ≤ tail tolerance.
fn tail_horizon(c: f64, tol: f64) -> f64 {
    (1.0 / tol).ln() / c
}

/// Estimate Σ_j w_j (U_{t_j} g)(x_a) from one simulation sweep; returns the
/// per-sample quadrature aggregates split at `split_index` (aggregates over
/// nodes [0, split) and [split, end)).
fn quadrature_split<G>(
    problem: &ProblemSpec,
    g: &G,
    x_a: &[f64],
    nodes: &[(f64, f64)],
    split_index: usize,
    n: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<(Vec<f64>, Vec<f64>), KernelError>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let times: Vec<f64> = nodes.iter().map(|(t, _)| *t).collect();
    let rows = fk_rows(problem, g, x_a, &times, n, seed, opts)?;
    let cols = nodes.len();
    let samples = rows.len() / cols;
    let mut head = Vec::with_capacity(samples);
    let mut tail = Vec::with_capacity(samples);
    for r in 0..samples {
        let row = &rows[r * cols..(r + 1) * cols];
        let mut h = 0.0;
        let mut t = 0.0;
        for (j, (_, w)) in nodes.iter().enumerate() {
            if j < split_index {
                h += w * row[j];
            } else {
                t += w * row[j];
            }
        }
        head.push(h);
        tail.push(t);
    }
    Ok((head, tail))
}

/// The Dirichlet elementary kernel applied to the problem source:
/// ∫₀^{τ⊥} (U_t f)(x_a) dt, or the classical first-exit estimate in
/// baseline mode. Exactly 0 at boundary starts.
pub fn dirichlet_apply(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    if is_baseline(problem) {
        let outcomes = baseline_batch(problem, x_a, n, seed, cfg)?;
        let interior: Vec<f64> = outcomes.iter().map(|o| o.interior).collect();
        let (value, std_error) = mean_and_se(&interior);
        return Ok(KernelEstimate {
            value,
            std_error,
            samples: n,
            decomposition: None,
            time_nodes: Vec::new(),
            rule: "baseline-first-exit",
        });
    }
    let profile = exit_profile(problem, x_a)?;
    if profile.exit_time == 0.0 {
        return Ok(KernelEstimate::exact(0.0, "boundary-start"));
    }
    let nodes = dirichlet_nodes(profile.exit_time, cfg.time_nodes);
    let f = global_source(problem);
    let opts = McOptions {
        dt_max: cfg.dt_max,
        stream: cfg.stream,
        antithetic: false,
    };
    let (head, _) = quadrature_split(problem, &f, x_a, &nodes, nodes.len(), n, seed, &opts)?;
    let (value, std_error) = mean_and_se(&head);
    Ok(KernelEstimate {
        value,
        std_error,
        samples: head.len(),
        decomposition: None,
        time_nodes: nodes.iter().map(|(t, _)| *t).collect(),
        rule: "gauss-legendre[0,tau]",
    })
}

/// The Dirichlet boundary kernel applied to the boundary data:
/// (U_{τ⊥} φ)(x_a). Exactly φ(x_a) at boundary starts.
pub fn dirichlet_boundary_apply(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    if is_baseline(problem) {
        let outcomes = baseline_batch(problem, x_a, n, seed, cfg)?;
        let boundary: Vec<f64> = outcomes.iter().map(|o| o.boundary).collect();
        let (value, std_error) = mean_and_se(&boundary);
        return Ok(KernelEstimate {
            value,
            std_error,
            samples: n,
            decomposition: None,
            time_nodes: Vec::new(),
            rule: "baseline-first-exit",
        });
    }
    let profile = exit_profile(problem, x_a)?;
    let phi = |x: &[f64]| problem.boundary_data.eval(x);
    if profile.exit_time == 0.0 {
        return Ok(KernelEstimate::exact(phi(x_a), "boundary-start"));
    }
    let opts = McOptions {
        dt_max: cfg.dt_max,
        stream: cfg.stream,
        antithetic: false,
    };
    let est = propagate_with(problem, &phi, x_a, profile.exit_time, n, seed, &opts)?;
    Ok(KernelEstimate {
        value: est.value,
        std_error: est.std_error,
        samples: est.samples,
        decomposition: None,
        time_nodes: vec![profile.exit_time],
        rule: "propagate[tau]",
    })
}

/// K∞ applied to the source: ∫₀^∞ (U_t f)(x_a) dt with the geometric-panel
/// tail truncated once e^{-cT} ≤ the tail tolerance.
pub fn k_infinity_apply(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    k_infinity_core(problem, x_a, n, seed, cfg, false)
}

fn k_infinity_core(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
    masked: bool,
) -> Result<KernelEstimate, KernelError> {
    let c = dissipation_constant(problem, x_a, cfg)?;
    let t_star = tail_horizon(c, cfg.tail_rel_tol);
    let nodes = tail_nodes(0.0, t_star);
    let global = global_source(problem);
    let restricted = masked_source(problem);
    let f = move |x: &[f64]| {
        if masked {
            restricted(x)
        } else {
            global(x)
        }
    };
    let opts = McOptions {
        dt_max: cfg.dt_max,
        stream: cfg.stream,
        antithetic: false,
    };
    let (head, _) = quadrature_split(problem, &f, x_a, &nodes, nodes.len(), n, seed, &opts)?;
    let (value, std_error) = mean_and_se(&head);
    Ok(KernelEstimate {
        value,
        std_error,
        samples: head.len(),
        decomposition: None,
        time_nodes: nodes.iter().map(|(t, _)| *t).collect(),
        rule: "geometric-panels[0,T*]",
    })
}

/// F_U in its defining (direct) form: ∫_{τ⊥}^∞ (U_t f)(x_a) dt.
pub fn f_u_apply(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    if is_baseline(problem) {
        return Err(KernelError::BaselineStrategy);
    }
    let profile = exit_profile(problem, x_a)?;
    let c = dissipation_constant(problem, x_a, cfg)?;
    let t_star = tail_horizon(c, cfg.tail_rel_tol);
    let nodes = tail_nodes(profile.exit_time, t_star);
    let f = global_source(problem);
    let opts = McOptions {
        dt_max: cfg.dt_max,
        stream: cfg.stream,
        antithetic: false,
    };
    let (head, _) = quadrature_split(problem, &f, x_a, &nodes, nodes.len(), n, seed, &opts)?;
    let (value, std_error) = mean_and_se(&head);
    Ok(KernelEstimate {
        value,
        std_error,
        samples: head.len(),
        decomposition: None,
        time_nodes: nodes.iter().map(|(t, _)| *t).collect(),
        rule: "geometric-panels[tau,T*]",
    })
}

/// Dirichlet kernel with its K∞ − F_U decomposition from a single sweep:
/// the three estimates share paths and quadrature nodes, so
/// value = k_infinity − f_u holds to roundoff.
pub fn dirichlet_split_apply(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    if is_baseline(problem) {
        return Err(KernelError::BaselineStrategy);
    }
    let profile = exit_profile(problem, x_a)?;
    let c = dissipation_constant(problem, x_a, cfg)?;
    let t_star = tail_horizon(c, cfg.tail_rel_tol).max(profile.exit_time + 1.0);
    let mut nodes = dirichlet_nodes(profile.exit_time.max(1e-12), cfg.time_nodes);
    let split_index = nodes.len();
    nodes.extend(tail_nodes(
        profile.exit_time.max(1e-12),
        t_star - profile.exit_time,
    ));
    let f = global_source(problem);
    let opts = McOptions {
        dt_max: cfg.dt_max,
        stream: cfg.stream,
        antithetic: false,
    };
    let (head, tail) =
        quadrature_split(problem, &f, x_a, &nodes, split_index, n, seed, &opts)?;
    let (value, std_error) = mean_and_se(&head);
    let (f_u, _) = mean_and_se(&tail);
    Ok(KernelEstimate {
        value,
        std_error,
        samples: head.len(),
        decomposition: Some(KernelSplit {
            k_infinity: value + f_u,
            f_u,
            reflected: false,
        }),
        time_nodes: nodes.iter().map(|(t, _)| *t).collect(),
        rule: "split[0,tau,T*]",
    })
}

/// Boundary reflection point for the σ-transformed F_U realization.
pub fn reflect_through_boundary(problem: &ProblemSpec, x: &[f64]) -> Result<Vec<f64>, KernelError> {
    match problem.domain.shape() {
        Shape::Interval { a, b } => {
            let e = if (x[0] - a).abs() <= (b - x[0]).abs() {
                *a
            } else {
                *b
            };
            Ok(vec![2.0 * e - x[0]])
        }
        Shape::HalfSpace { normal, offset } => {
            let d = offset - normal.iter().zip(x).map(|(n, xi)| n * xi).sum::<f64>();
            Ok(x.iter().zip(normal).map(|(xi, n)| xi + 2.0 * d * n).collect())
        }
        Shape::Ball { center, radius } => {
            let r: f64 = x
                .iter()
                .zip(center)
                .map(|(xi, c)| (xi - c) * (xi - c))
                .sum::<f64>()
                .sqrt();
            if r < 1e-12 {
                let mut p = center.clone();
                p[0] += 2.0 * radius;
                return Ok(p);
            }
            let target = 2.0 * radius - r;
            Ok(x
                .iter()
                .zip(center)
                .map(|(xi, c)| c + (xi - c) / r * target)
                .collect())
        }
        other => Err(KernelError::UnsupportedDomain(format!(
            "boundary reflection not defined for {other:?}"
        ))),
    }
}

/// σ-transformed F_U: the full time integral started from the
/// boundary-reflected point. Coincides with K∞ at boundary starts and
/// realizes the Neumann flux cancellation.
pub fn f_u_apply_reflected(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    let reflected = reflect_through_boundary(problem, x_a)?;
    let mut est = k_infinity_core(problem, &reflected, n, seed, cfg, true)?;
    est.rule = "sigma-reflected[0,T*]";
    Ok(est)
}

/// The Neumann elementary kernel K^(N) = K∞ + F_U applied to the source.
///
/// The σ-transformed F_U realization is used (reflected start, same driving
/// noise as the K∞ leg), so boundary starts give exactly 2·K∞ and the normal
/// derivative cancels across the boundary.
pub fn neumann_apply(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    let k_inf = k_infinity_core(problem, x_a, n, seed, cfg, true)?;
    let f_u = f_u_apply_reflected(problem, x_a, n, seed, cfg)?;
    Ok(KernelEstimate {
        value: k_inf.value + f_u.value,
        std_error: k_inf.std_error.hypot(f_u.std_error),
        samples: k_inf.samples,
        decomposition: Some(KernelSplit {
            k_infinity: k_inf.value,
            f_u: f_u.value,
            reflected: true,
        }),
        time_nodes: k_inf.time_nodes,
        rule: "neumann[kinf+sigma]",
    })
}

/// The Neumann boundary kernel applied to normal-derivative data ψ:
/// the Θ-weighted boundary integral, with Θ evaluated through the
/// signed-distance foliation. Supported on the interval, the half-line, and
/// the 2-D ball (Gauss-normal foliations).
pub fn neumann_boundary_apply(
    problem: &ProblemSpec,
    x_a: &[f64],
    psi: &crate::model::ScalarField,
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<KernelEstimate, KernelError> {
    if is_baseline(problem) {
        return Err(KernelError::BaselineStrategy);
    }
    let profile = exit_profile(problem, x_a)?;
    if profile.exit_time == 0.0 {
        // Θ is strict: τ⊥ → 0 kills the term on the boundary.
        return Ok(KernelEstimate::exact(0.0, "boundary-start"));
    }
    // ψ integrated over the boundary components, gated by x ≻ x_B.
    let weighted: Box<dyn Fn(&[f64]) -> f64 + Sync> = match problem.domain.shape() {
        Shape::Interval { a, b } => {
            let (a, b) = (*a, *b);
            let psi_a = psi.eval(&[a]);
            let psi_b = psi.eval(&[b]);
            Box::new(move |x: &[f64]| {
                let mut acc = 0.0;
                if x[0] > a {
                    acc += psi_a;
                }
                if x[0] < b {
                    acc += psi_b;
                }
                acc
            })
        }
        Shape::HalfSpace { normal, offset } => {
            if x_a.len() != 1 {
                return Err(KernelError::UnsupportedDomain(
                    "half-space Neumann boundary kernel is implemented for m = 1".into(),
                ));
            }
            let (n0, b) = (normal[0], *offset);
            let boundary_point = b / n0;
            let psi_b = psi.eval(&[boundary_point]);
            Box::new(move |x: &[f64]| {
                if (x[0] - boundary_point) * n0 > 0.0 {
                    psi_b
                } else {
                    0.0
                }
            })
        }
        Shape::Ball { center, radius } => {
            if x_a.len() != 2 {
                return Err(KernelError::UnsupportedDomain(
                    "ball Neumann boundary kernel is implemented for m = 2".into(),
                ));
            }
            let rule = GaussLegendre::new(64);
            let (cx, cy, r) = (center[0], center[1], *radius);
            let total: f64 = rule.integrate(0.0, 2.0 * std::f64::consts::PI, |theta| {
                psi.eval(&[cx + r * theta.cos(), cy + r * theta.sin()])
            }) * r;
            Box::new(move |x: &[f64]| {
                let rho = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)).sqrt();
                if rho < r {
                    total
                } else {
                    0.0
                }
            })
        }
        other => {
            return Err(KernelError::UnsupportedDomain(format!(
                "no Gauss-normal foliation for {other:?}"
            )))
        }
    };
    let opts = McOptions {
        dt_max: cfg.dt_max,
        stream: cfg.stream,
        antithetic: false,
    };
    let est = propagate_with(problem, &weighted, x_a, profile.exit_time, n, seed, &opts)?;
    Ok(KernelEstimate {
        value: est.value,
        std_error: est.std_error,
        samples: est.samples,
        decomposition: None,
        time_nodes: vec![profile.exit_time],
        rule: "theta-weighted[tau]",
    })
}

// ---------------------------------------------------------------------------
// Baseline (classical first-exit) walking
// ---------------------------------------------------------------------------

/// Per-sample outcome of one first-exit walk.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    /// ∫₀^τ f(x(t)) e^{∫V} dt accumulated until exit.
    pub interior: f64,
    /// φ(x_exit) · e^{∫₀^τ V}.
    pub boundary: f64,
    pub exit_time: f64,
    pub exit_point: Vec<f64>,
}

/// Local diffusion variance along the inward normal at x:
/// (s/2π)·Σ_α (n̂·X_α)².
fn normal_variance(problem: &ProblemSpec, x: &[f64], normal: &[f64]) -> f64 {
    let base = problem.diffusion_scale / (2.0 * std::f64::consts::PI);
    problem
        .frame
        .iter()
        .map(|xf| {
            let v = xf.eval(x);
            let dot: f64 = v.iter().zip(normal).map(|(a, b)| a * b).sum();
            dot * dot
        })
        .sum::<f64>()
        * base
}

/// Boundary candidates for the bridge-crossing test: distances to each
/// boundary component (interval has two; other shapes use the signed
/// distance as one effective flat boundary).
fn boundary_gaps(problem: &ProblemSpec, x: &[f64]) -> Vec<(f64, Vec<f64>)> {
    match problem.domain.shape() {
        Shape::Interval { a, b } => vec![
            (x[0] - a, vec![*a]),
            (b - x[0], vec![*b]),
        ],
        _ => {
            let gap = -problem.domain.signed_distance(x);
            vec![(gap, problem.domain.project_to_boundary(x))]
        }
    }
}

fn walk_first_exit(
    problem: &ProblemSpec,
    x_a: &[f64],
    rng: &mut ChaCha8Rng,
    cfg: &KernelConfig,
    time_cap: f64,
    mut occupation: Option<&mut dyn FnMut(&[f64], f64)>,
) -> Result<BaselineOutcome, KernelError> {
    let dt = cfg.baseline_dt;
    let d = problem.frame.len();
    let f = global_source(problem);
    let mut x = x_a.to_vec();
    let mut v_prev = problem.potential.eval(&x);
    let mut w_log = 0.0_f64; // ∫V so far
    let mut interior = 0.0;
    let mut dz = vec![0.0; d];
    let sigma = increment_std(problem, dt);
    let mut t = 0.0;
    for step in 0..cfg.max_steps {
        if step + 1 == cfg.max_steps {
            return Err(KernelError::WalkBudgetExceeded(cfg.max_steps));
        }
        let f_prev = f(&x) * w_log.exp();
        let gaps_prev = boundary_gaps(problem, &x);
        let x_prev = x.clone();
        for z in dz.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *z = sigma * g;
        }
        euler_step(problem, &mut x, dt, &dz);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::Sampling(PathError::NonFinite {
                sample: 0,
                step,
                context: "baseline walk".into(),
            }));
        }
        let d_new = problem.domain.signed_distance(&x);
        if d_new >= 0.0 {
            // Stepped out: exit at the linear crossing fraction.
            let gap_prev = -problem.domain.signed_distance(&x_prev);
            let frac = if gap_prev + d_new > 0.0 {
                gap_prev / (gap_prev + d_new)
            } else {
                0.5
            };
            let partial = frac * dt;
            let v_mid = problem.potential.eval(&x_prev);
            w_log += v_mid * partial;
            interior += f_prev * partial;
            if let Some(occ) = occupation.as_deref_mut() {
                occ(&x_prev, w_log.exp() * partial);
            }
            let exit_point = problem.domain.project_to_boundary(&x);
            let weight = w_log.exp();
            return Ok(BaselineOutcome {
                interior,
                boundary: problem.boundary_data.eval(&exit_point) * weight,
                exit_time: t + partial,
                exit_point,
            });
        }
        // Brownian-bridge crossing test against each boundary component.
        let gaps_new = boundary_gaps(problem, &x);
        for ((h0, target), (h1, _)) in gaps_prev.iter().zip(&gaps_new) {
            if *h0 <= 0.0 || *h1 <= 0.0 {
                continue;
            }
            let normal = problem.domain.inward_normal(target);
            let var = normal_variance(problem, &x_prev, &normal);
            if var <= 0.0 {
                continue;
            }
            let p_cross = (-2.0 * h0 * h1 / (var * dt)).exp();
            let u: f64 = rng.random();
            if u < p_cross {
                let partial = 0.5 * dt;
                let v_mid = problem.potential.eval(&x_prev);
                w_log += v_mid * partial;
                interior += f_prev * partial;
                if let Some(occ) = occupation.as_deref_mut() {
                    occ(&x_prev, w_log.exp() * partial);
                }
                let weight = w_log.exp();
                return Ok(BaselineOutcome {
                    interior,
                    boundary: problem.boundary_data.eval(target) * weight,
                    exit_time: t + partial,
                    exit_point: target.clone(),
                });
            }
        }
        // Interior step: trapezoid both the potential and the source.
        let v_next = problem.potential.eval(&x);
        w_log += 0.5 * (v_prev + v_next) * dt;
        v_prev = v_next;
        t += dt;
        let f_next = f(&x) * w_log.exp();
        interior += 0.5 * (f_prev + f_next) * dt;
        if let Some(occ) = occupation.as_deref_mut() {
            occ(&x, w_log.exp() * dt);
        }
        if t >= time_cap {
            // Dissipative truncation: the remaining weight is below the
            // tail tolerance, so the boundary term is dropped.
            return Ok(BaselineOutcome {
                interior,
                boundary: 0.0,
                exit_time: t,
                exit_point: x,
            });
        }
    }
    Err(KernelError::WalkBudgetExceeded(cfg.max_steps))
}

/// Time cap for baseline walks: unbounded domains need a dissipative
/// potential to truncate; bounded domains exit on their own.
fn baseline_time_cap(problem: &ProblemSpec, x_a: &[f64], cfg: &KernelConfig) -> Result<f64, KernelError> {
    match problem.domain.shape() {
        Shape::HalfSpace { .. } | Shape::FullSpace => {
            let c = dissipation_constant(problem, x_a, cfg)?;
            Ok(tail_horizon(c, cfg.tail_rel_tol))
        }
        _ => Ok(f64::INFINITY),
    }
}

/// Run n independent first-exit walks.
pub fn baseline_batch(
    problem: &ProblemSpec,
    x_a: &[f64],
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<Vec<BaselineOutcome>, KernelError> {
    if n == 0 {
        return Err(KernelError::Sampling(PathError::EmptyBatch));
    }
    if !problem.domain.has_boundary() {
        return Err(KernelError::UnsupportedDomain(
            "first-exit walks need a boundary".into(),
        ));
    }
    let cap = baseline_time_cap(problem, x_a, cfg)?;
    let streams = Streams::new(seed);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(cfg.stream, i as u64);
            walk_first_exit(problem, x_a, &mut rng, cfg, cap, None)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Binned pointwise density
// ---------------------------------------------------------------------------

/// A regular binning of the domain bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
}

impl DensityGrid {
    pub fn new_1d(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo: vec![lo],
            hi: vec![hi],
            bins: vec![bins],
        }
    }

    pub fn total_bins(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn bin_volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(&self.bins)
            .map(|((l, h), b)| (h - l) / *b as f64)
            .product()
    }

    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.lo.len() {
            let w = (self.hi[i] - self.lo[i]) / self.bins[i] as f64;
            let k = ((x[i] - self.lo[i]) / w).floor();
            if k < 0.0 || k >= self.bins[i] as f64 {
                return None;
            }
            idx = idx * self.bins[i] + k as usize;
        }
        Some(idx)
    }

    /// Center of a flat bin index.
    pub fn center(&self, mut idx: usize) -> Vec<f64> {
        let m = self.lo.len();
        let mut coords = vec![0usize; m];
        for i in (0..m).rev() {
            coords[i] = idx % self.bins[i];
            idx /= self.bins[i];
        }
        (0..m)
            .map(|i| {
                let w = (self.hi[i] - self.lo[i]) / self.bins[i] as f64;
                self.lo[i] + (coords[i] as f64 + 0.5) * w
            })
            .collect()
    }
}

/// Binned estimate of the kernel density K(x_a, ·).
#[derive(Debug, Clone)]
pub struct GriddedDensity {
    pub grid: DensityGrid,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Per-bin hit counts; zero-hit bins are flagged here rather than by
    /// erroring out.
    pub hits: Vec<usize>,
    pub samples: usize,
}

/// Histogram estimate of K(x_a, ·) over the grid: endpoint binning of the
/// time-quadrature in critical modes, occupation density before exit in
/// baseline mode.
pub fn kernel_density(
    problem: &ProblemSpec,
    x_a: &[f64],
    grid: &DensityGrid,
    n: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<GriddedDensity, KernelError> {
    let nb = grid.total_bins();
    let vol = grid.bin_volume();
    let streams = Streams::new(seed);
    let per_sample: Vec<Vec<(usize, f64)>> = if is_baseline(problem) {
        let cap = baseline_time_cap(problem, x_a, cfg)?;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = streams.rng(cfg.stream, i as u64);
                let mut contrib: Vec<(usize, f64)> = Vec::new();
                let mut occ = |x: &[f64], w: f64| {
                    if let Some(idx) = grid.index_of(x) {
                        contrib.push((idx, w / vol));
                    }
                };
                walk_first_exit(problem, x_a, &mut rng, cfg, cap, Some(&mut occ))?;
                Ok(contrib)
            })
            .collect::<Result<_, KernelError>>()?
    } else {
        let profile = exit_profile(problem, x_a)?;
        if profile.exit_time == 0.0 {
            return Ok(GriddedDensity {
                grid: grid.clone(),
                values: vec![0.0; nb],
                std_errors: vec![0.0; nb],
                hits: vec![0; nb],
                samples: n,
            });
        }
        let nodes = dirichlet_nodes(profile.exit_time, cfg.time_nodes);
        let times: Vec<f64> = nodes.iter().map(|(t, _)| *t).collect();
        // Bin indices ride along through an encoded value: row entries are
        // recovered per node from a second sweep keyed identically.
        let opts = McOptions {
            dt_max: cfg.dt_max,
            stream: cfg.stream,
            antithetic: false,
        };
        // fk_rows with g = position encoder is not enough (needs the bin of
        // x at each node), so walk explicitly here.
        let weights: Vec<f64> = nodes.iter().map(|(_, w)| *w).collect();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = streams.rng(opts.stream, i as u64);
                bin_walk(problem, x_a, &times, &weights, grid, vol, &mut rng)
            })
            .collect::<Result<_, KernelError>>()?
    };

    let mut sums = vec![0.0; nb];
    let mut sq = vec![0.0; nb];
    let mut hits = vec![0usize; nb];
    for contribs in &per_sample {
        let mut per_bin = std::collections::HashMap::new();
        for (idx, v) in contribs {
            *per_bin.entry(*idx).or_insert(0.0) += v;
        }
        for (idx, v) in per_bin {
            sums[idx] += v;
            sq[idx] += v * v;
            hits[idx] += 1;
        }
    }
    let nf = n as f64;
    let values: Vec<f64> = sums.iter().map(|s| s / nf).collect();
    let std_errors: Vec<f64> = sq
        .iter()
        .zip(&values)
        .map(|(s2, m)| {
            if n < 2 {
                0.0
            } else {
                ((s2 / nf - m * m).max(0.0) / (nf - 1.0)).sqrt()
            }
        })
        .collect();
    Ok(GriddedDensity {
        grid: grid.clone(),
        values,
        std_errors,
        hits,
        samples: n,
    })
}

fn bin_walk(
    problem: &ProblemSpec,
    x_a: &[f64],
    times: &[f64],
    weights: &[f64],
    grid: &DensityGrid,
    vol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, f64)>, KernelError> {
    let dt_max = 1.0 / 64.0;
    let d = problem.frame.len();
    let mut x = x_a.to_vec();
    let mut v_prev = problem.potential.eval(&x);
    let mut w_log = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    let mut dz = vec![0.0; d];
    for (j, &t) in times.iter().enumerate() {
        let gap = t - t_prev;
        let pieces = (gap / dt_max).ceil().max(1.0) as usize;
        let dt = gap / pieces as f64;
        let sigma = increment_std(problem, dt);
        for _ in 0..pieces {
            for z in dz.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *z = sigma * g;
            }
            euler_step(problem, &mut x, dt, &dz);
            let v_next = problem.potential.eval(&x);
            w_log += 0.5 * (v_prev + v_next) * dt;
            v_prev = v_next;
        }
        t_prev = t;
        if let Some(idx) = grid.index_of(&x) {
            out.push((idx, weights[j] * w_log.exp() / vol));
        }
    }
    Ok(out)
}
