//! Critical paths, the path-independent first exit time τ⊥, the exit map σ,
//! and the boundary-condition residuals that characterize critical paths.
//!
//! For the strategies implemented here the critical path is the straight
//! segment from the start point to its nearest boundary point, travelled at
//! the strategy speed: dist/c for `CriticalDistance(c)`, and √(E/π) for
//! `FixedEnergy(E)` (the constant-energy constraint of the quadratic action
//! density π|ẋ|² gives E = π v²).

use thiserror::Error;

use crate::model::{Domain, ExitTimeStrategy, ProblemSpec, Shape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticalError {
    #[error("start point lies outside the domain closure (signed distance {0})")]
    OutsideClosure(f64),
    #[error("domain has no boundary to exit through")]
    UnboundedDomain,
    #[error("the stochastic baseline has no critical exit geometry")]
    BaselineStrategy,
    #[error("terminal velocity vanishes; transversality is undefined")]
    ZeroTerminalVelocity,
    #[error("terminal point is off the constraint set (|S| = {0:e})")]
    TerminalOffBoundary(f64),
}

/// A critical path as a polyline with terminal data.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPath {
    pub times: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    /// The transversality multiplier ν minimizing ‖∂F/∂ẋ + ν∇S‖ at the
    /// terminal point.
    pub multiplier: f64,
}

impl CriticalPath {
    /// Straight segment from `from` to `to` over [0, τ] with `n` nodes.
    pub fn straight_segment(from: &[f64], to: &[f64], tau: f64, n: usize) -> Self {
        assert!(n >= 2);
        let times: Vec<f64> = (0..n).map(|k| tau * k as f64 / (n - 1) as f64).collect();
        let nodes = times
            .iter()
            .map(|&t| {
                let lambda = if tau > 0.0 { t / tau } else { 0.0 };
                from.iter()
                    .zip(to)
                    .map(|(a, b)| a + lambda * (b - a))
                    .collect()
            })
            .collect();
        Self {
            times,
            nodes,
            multiplier: 0.0,
        }
    }

    /// Finite-difference velocity at node k (central in the interior,
    /// one-sided at the ends).
    pub fn velocity(&self, k: usize) -> Vec<f64> {
        let last = self.nodes.len() - 1;
        let (i, j) = if k == 0 {
            (0, 1)
        } else if k == last {
            (last - 1, last)
        } else {
            (k - 1, k + 1)
        };
        let dt = self.times[j] - self.times[i];
        self.nodes[j]
            .iter()
            .zip(&self.nodes[i])
            .map(|(a, b)| (a - b) / dt)
            .collect()
    }
}

/// The exit data at one start point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitProfile {
    pub start: Vec<f64>,
    /// τ⊥: positive in the interior, exactly 0 on the boundary.
    pub exit_time: f64,
    /// σ(x_a): the critical path's boundary hit point.
    pub exit_point: Vec<f64>,
    pub path: CriticalPath,
    pub transversality_residual: f64,
    pub energy_residual: f64,
    pub strategy: ExitTimeStrategy,
    /// Every (τ⊥, σ) candidate when the nearest boundary point ties
    /// (interval midpoints, annulus mid-radius, ball centers).
    pub candidates: Vec<(f64, Vec<f64>)>,
}

const PATH_NODES: usize = 17;
const BOUNDARY_TOL: f64 = 1e-12;

/// Speed of the critical segment under a strategy.
pub fn strategy_speed(strategy: &ExitTimeStrategy) -> Result<f64, CriticalError> {
    match strategy {
        ExitTimeStrategy::CriticalDistance { speed } => Ok(*speed),
        ExitTimeStrategy::FixedEnergy { energy } => Ok((energy / std::f64::consts::PI).sqrt()),
        ExitTimeStrategy::StochasticBaseline => Err(CriticalError::BaselineStrategy),
    }
}

/// Energy of the quadratic action density π|ẋ|² at the strategy speed.
pub fn strategy_energy(strategy: &ExitTimeStrategy) -> Result<f64, CriticalError> {
    match strategy {
        ExitTimeStrategy::FixedEnergy { energy } => Ok(*energy),
        other => {
            let v = strategy_speed(other)?;
            Ok(std::f64::consts::PI * v * v)
        }
    }
}

/// Compute the exit profile of a start point under the problem's strategy.
pub fn exit_profile(problem: &ProblemSpec, x_a: &[f64]) -> Result<ExitProfile, CriticalError> {
    let speed = strategy_speed(&problem.exit_strategy)?;
    let domain = &problem.domain;
    if !domain.has_boundary() {
        return Err(CriticalError::UnboundedDomain);
    }
    let d = domain.signed_distance(x_a);
    if d > BOUNDARY_TOL {
        return Err(CriticalError::OutsideClosure(d));
    }
    if d.abs() <= BOUNDARY_TOL {
        let path = CriticalPath::straight_segment(x_a, x_a, 0.0, 2);
        return Ok(ExitProfile {
            start: x_a.to_vec(),
            exit_time: 0.0,
            exit_point: x_a.to_vec(),
            path,
            transversality_residual: 0.0,
            energy_residual: 0.0,
            strategy: problem.exit_strategy,
            candidates: vec![(0.0, x_a.to_vec())],
        });
    }

    let candidates = exit_candidates(domain, x_a, speed);
    let (tau, sigma) = candidates[0].clone();
    let mut path = CriticalPath::straight_segment(x_a, &sigma, tau, PATH_NODES);

    // Residuals against the free quadratic density F = π|ẋ|² and the
    // boundary level set S = signed distance.
    let f_density =
        |_t: f64, _x: &[f64], v: &[f64]| std::f64::consts::PI * v.iter().map(|c| c * c).sum::<f64>();
    let s_fn = |x: &[f64]| domain.signed_distance(x);
    let (t_res, multiplier) = transversality_residual_full(&path, &f_density, &s_fn)?;
    path.multiplier = multiplier;
    let energy = strategy_energy(&problem.exit_strategy)?;
    let e_res = energy_residual(&path, &f_density, energy);

    Ok(ExitProfile {
        start: x_a.to_vec(),
        exit_time: tau,
        exit_point: sigma,
        path,
        transversality_residual: t_res,
        energy_residual: e_res,
        strategy: problem.exit_strategy,
        candidates,
    })
}

/// All nearest-boundary candidates, minimal τ⊥ first.
fn exit_candidates(domain: &Domain, x_a: &[f64], speed: f64) -> Vec<(f64, Vec<f64>)> {
    let dist = -domain.signed_distance(x_a);
    let tau = dist / speed;
    match domain.shape() {
        Shape::Interval { a, b } => {
            let (da, db) = ((x_a[0] - a).abs(), (b - x_a[0]).abs());
            if (da - db).abs() <= BOUNDARY_TOL {
                vec![(tau, vec![*a]), (tau, vec![*b])]
            } else if da < db {
                vec![(tau, vec![*a])]
            } else {
                vec![(tau, vec![*b])]
            }
        }
        Shape::Ball { center, radius } => {
            let r: f64 = x_a
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt();
            if r <= BOUNDARY_TOL {
                // Degenerate center: expose one representative per axis ray.
                let mut cands = Vec::new();
                for i in 0..x_a.len() {
                    for sign in [1.0, -1.0] {
                        let mut p = center.clone();
                        p[i] += sign * radius;
                        cands.push((tau, p));
                    }
                }
                cands
            } else {
                vec![(tau, domain.project_to_boundary(x_a))]
            }
        }
        Shape::Annulus { center, inner, outer } => {
            let r: f64 = x_a
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt();
            let (di, do_) = ((r - inner).abs(), (outer - r).abs());
            let dir: Vec<f64> = x_a
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c) / r.max(1e-300))
                .collect();
            let at = |radius: f64| -> Vec<f64> {
                center.iter().zip(&dir).map(|(c, u)| c + radius * u).collect()
            };
            if (di - do_).abs() <= BOUNDARY_TOL {
                vec![(tau, at(*inner)), (tau, at(*outer))]
            } else {
                vec![(tau, domain.project_to_boundary(x_a))]
            }
        }
        _ => vec![(tau, domain.project_to_boundary(x_a))],
    }
}

/// Transversality residual: the norm of the terminal momentum component
/// orthogonal to ∇S, which is min over the scalar multiplier ν of
/// ‖∂F/∂ẋ(t_b) + ν∇S(x(t_b))‖. Zero exactly when the terminal velocity is
/// parallel to ∇S (normal incidence).
pub fn transversality_residual<F, S>(
    path: &CriticalPath,
    f_density: &F,
    s_fn: &S,
) -> Result<f64, CriticalError>
where
    F: Fn(f64, &[f64], &[f64]) -> f64,
    S: Fn(&[f64]) -> f64,
{
    transversality_residual_full(path, f_density, s_fn).map(|(r, _)| r)
}

fn transversality_residual_full<F, S>(
    path: &CriticalPath,
    f_density: &F,
    s_fn: &S,
) -> Result<(f64, f64), CriticalError>
where
    F: Fn(f64, &[f64], &[f64]) -> f64,
    S: Fn(&[f64]) -> f64,
{
    let last = path.nodes.len() - 1;
    let x_b = &path.nodes[last];
    let t_b = path.times[last];
    let s_val = s_fn(x_b).abs();
    if s_val > 1e-8 {
        return Err(CriticalError::TerminalOffBoundary(s_val));
    }
    let v = path.velocity(last);
    let speed2: f64 = v.iter().map(|c| c * c).sum();
    if speed2 < 1e-24 {
        return Err(CriticalError::ZeroTerminalVelocity);
    }
    // Terminal momentum p = ∂F/∂ẋ in the velocity arguments.
    let m = v.len();
    let p: Vec<f64> = (0..m)
        .map(|i| {
            richardson_partial(
                |probe| f_density(t_b, x_b, probe),
                &v,
                i,
                1e-4 * (1.0 + v[i].abs()),
            )
        })
        .collect();
    // ∇S at the terminal point.
    let g: Vec<f64> = (0..m)
        .map(|i| richardson_partial(|probe| s_fn(probe), x_b, i, 1e-4 * (1.0 + x_b[i].abs())))
        .collect();
    let g2: f64 = g.iter().map(|c| c * c).sum();
    if g2 < 1e-24 {
        return Err(CriticalError::TerminalOffBoundary(f64::INFINITY));
    }
    let pg: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
    let nu = -pg / g2;
    let residual = p
        .iter()
        .zip(&g)
        .map(|(pi, gi)| {
            let r = pi + nu * gi;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok((residual, nu))
}

/// Richardson-extrapolated central difference of f in coordinate `i`;
/// fourth-order accurate, which keeps residual thresholds at 1e-10 clear of
/// finite-difference noise.
fn richardson_partial<F>(f: F, at: &[f64], i: usize, h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = at.to_vec();
    let mut central = |step: f64| {
        probe[i] = at[i] + step;
        let fp = f(&probe);
        probe[i] = at[i] - step;
        let fm = f(&probe);
        probe[i] = at[i];
        (fp - fm) / (2.0 * step)
    };
    let d_h = central(h);
    let d_half = central(0.5 * h);
    (4.0 * d_half - d_h) / 3.0
}

/// Max over nodes of |(∂L/∂ẋ)·ẋ − L − E| for a Lagrangian density L.
pub fn energy_residual<L>(path: &CriticalPath, l_density: &L, energy: f64) -> f64
where
    L: Fn(f64, &[f64], &[f64]) -> f64,
{
    let mut worst: f64 = 0.0;
    for k in 0..path.nodes.len() {
        let x = &path.nodes[k];
        let t = path.times[k];
        let v = path.velocity(k);
        let m = v.len();
        let mut probe = v.clone();
        let mut p_dot_v = 0.0;
        for i in 0..m {
            let h = 1e-6 * (1.0 + v[i].abs());
            probe[i] = v[i] + h;
            let fp = l_density(t, x, &probe);
            probe[i] = v[i] - h;
            let fm = l_density(t, x, &probe);
            probe[i] = v[i];
            p_dot_v += (fp - fm) / (2.0 * h) * v[i];
        }
        let res = (p_dot_v - l_density(t, x, &v) - energy).abs();
        worst = worst.max(res);
    }
    worst
}
