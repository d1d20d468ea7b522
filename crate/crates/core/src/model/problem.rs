//! The full PDE instance and its validation.

use super::{Domain, ModelError, ScalarField, VectorField};

/// How the first exit time `τ⊥` is produced.
///
/// `CriticalDistance` and `FixedEnergy` realize the path-independent exit
/// time of a critical path; `StochasticBaseline` is the classical per-path
/// first-exit comparator and is handled by the sampling layer, not the exit
/// geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitTimeStrategy {
    /// Straight critical segment travelled at speed `c`: τ⊥ = dist/c.
    CriticalDistance { speed: f64 },
    /// Straight critical segment at the speed fixed by the energy constraint
    /// of the quadratic action density: v = √(E/π), so τ⊥ = dist·√(π/E).
    FixedEnergy { energy: f64 },
    /// Per-path stochastic first exit (comparator mode).
    StochasticBaseline,
}

impl ExitTimeStrategy {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ExitTimeStrategy::CriticalDistance { speed } if *speed <= 0.0 => Err(
                ModelError::NonPositiveParameter("critical-distance speed".into()),
            ),
            ExitTimeStrategy::FixedEnergy { energy } if *energy <= 0.0 => {
                Err(ModelError::NonPositiveParameter("fixed energy".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Uniform time grid t_k = k·T/N on [0, T].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, ModelError> {
        if horizon <= 0.0 {
            return Err(ModelError::NonPositiveParameter("grid horizon".into()));
        }
        if steps == 0 {
            return Err(ModelError::NonPositiveParameter("grid step count".into()));
        }
        Ok(Self { horizon, steps })
    }

    /// Grid covering [0, t] with spacing at most `dt_max`.
    pub fn with_max_dt(t: f64, dt_max: f64) -> Result<Self, ModelError> {
        let steps = (t / dt_max).ceil().max(1.0) as usize;
        Self::new(t, steps)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.node(k))
    }
}

/// A validated problem instance: the data of the operator
/// L = (s/4π) Σ_α (X_(α)·∇)² + Y·∇ + V together with source, boundary data,
/// and the exit-time policy.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub frame: Vec<VectorField>,
    pub drift: VectorField,
    pub potential: ScalarField,
    pub source: ScalarField,
    pub boundary_data: ScalarField,
    pub diffusion_scale: f64,
    pub exit_strategy: ExitTimeStrategy,
}

impl ProblemSpec {
    /// Validate every structural invariant eagerly.
    pub fn validate(&self) -> Result<(), ModelError> {
        let m = self.domain.dimension();
        if self.frame.is_empty() {
            return Err(ModelError::DegenerateFrame("frame is empty".into()));
        }
        if self.frame.len() > m {
            return Err(ModelError::DimensionMismatch(format!(
                "frame has {} fields but the domain dimension is {m}",
                self.frame.len()
            )));
        }
        for f in &self.frame {
            if f.dimension() != m {
                return Err(ModelError::DimensionMismatch(format!(
                    "frame field {} has dimension {} (domain is {m}-dimensional)",
                    f.name(),
                    f.dimension()
                )));
            }
        }
        if self.drift.dimension() != m {
            return Err(ModelError::DimensionMismatch(
                "drift dimension differs from the domain".into(),
            ));
        }
        if self.diffusion_scale <= 0.0 {
            return Err(ModelError::NonPositiveParameter("diffusion scale".into()));
        }
        self.exit_strategy.validate()?;

        // Frame independence: Gram determinant at sampled interior points.
        let probes = self.domain.interior_probes(8);
        for p in &probes {
            let vectors: Vec<Vec<f64>> = self.frame.iter().map(|f| f.eval(p)).collect();
            for (i, v) in vectors.iter().enumerate() {
                if v.len() != m {
                    return Err(ModelError::DimensionMismatch(format!(
                        "frame field {i} returned {} components at {p:?}",
                        v.len()
                    )));
                }
            }
            let d = vectors.len();
            let mut gram = nalgebra::DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    gram[(i, j)] = vectors[i]
                        .iter()
                        .zip(&vectors[j])
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                }
            }
            if gram.determinant().abs() <= 1e-10 {
                return Err(ModelError::DegenerateFrame(format!(
                    "frame vectors are linearly dependent at {p:?}"
                )));
            }
        }

        // Analytic gradients (when supplied) must match finite differences.
        for (name, field) in [
            ("potential", &self.potential),
            ("source", &self.source),
            ("boundary_data", &self.boundary_data),
        ] {
            field.validate_gradient(&probes).map_err(|e| {
                ModelError::GradientMismatch(format!("{name}: {e}"))
            })?;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Apply the generator L to a C² scalar function at x via nested
    /// directional finite differences (exact for quadratics when the frame
    /// and drift are constant).
    pub fn apply_generator<F: Fn(&[f64]) -> f64 + Copy>(&self, f: F, x: &[f64], h: f64) -> f64 {
        let m = self.dimension();
        let dir_derivative = |g: &dyn Fn(&[f64]) -> f64, p: &[f64], v: &[f64]| {
            let mut fwd = p.to_vec();
            let mut bwd = p.to_vec();
            for i in 0..m {
                fwd[i] += h * v[i];
                bwd[i] -= h * v[i];
            }
            (g(&fwd) - g(&bwd)) / (2.0 * h)
        };
        let mut second_order = 0.0;
        for xf in &self.frame {
            let inner = |p: &[f64]| dir_derivative(&|q: &[f64]| f(q), p, &xf.eval(p));
            second_order += dir_derivative(&inner, x, &xf.eval(x));
        }
        let drift_term = dir_derivative(&|q: &[f64]| f(q), x, &self.drift.eval(x));
        self.diffusion_scale / (4.0 * std::f64::consts::PI) * second_order
            + drift_term
            + self.potential.eval(x) * f(x)
    }
}
