//! Scalar and vector fields over the domain coordinates.

use std::fmt;
use std::sync::Arc;

use super::ModelError;
use crate::expr::Expression;

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Where a field definition came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Builtin,
    Expression,
}

/// A real scalar field with an optional analytic gradient.
///
/// Expression-backed fields map math-domain errors to NaN; the samplers
/// detect non-finite states and surface an error with path context.
#[derive(Clone)]
pub struct ScalarField {
    eval: EvalFn,
    gradient: Option<GradFn>,
    provenance: Provenance,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("provenance", &self.provenance)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_fn<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self {
            eval: Arc::new(f),
            gradient: None,
            provenance: Provenance::Builtin,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_fn(move |_| value)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn from_expression(e: Expression) -> Self {
        Self {
            eval: Arc::new(move |x: &[f64]| e.evaluate(x).unwrap_or(f64::NAN)),
            gradient: None,
            provenance: Provenance::Expression,
        }
    }

    pub fn with_gradient<G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static>(
        mut self,
        g: G,
    ) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Gradient: analytic when supplied, otherwise central finite
    /// differences with step 1e-5·(1+|x|).
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        self.fd_gradient(x)
    }

    pub fn fd_gradient(&self, x: &[f64]) -> Vec<f64> {
        let scale = 1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        (0..x.len())
            .map(|i| {
                xp[i] = x[i] + scale;
                xm[i] = x[i] - scale;
                let d = (self.eval(&xp) - self.eval(&xm)) / (2.0 * scale);
                xp[i] = x[i];
                xm[i] = x[i];
                d
            })
            .collect()
    }

    /// Check a supplied analytic gradient against central differences on the
    /// given probe points (1e-6 relative).
    pub fn validate_gradient(&self, probes: &[Vec<f64>]) -> Result<(), ModelError> {
        if self.gradient.is_none() {
            return Ok(());
        }
        for p in probes {
            let analytic = self.gradient(p);
            let numeric = self.fd_gradient(p);
            for (a, n) in analytic.iter().zip(&numeric) {
                let tol = 1e-6 * a.abs().max(n.abs()).max(1.0);
                if (a - n).abs() > tol {
                    return Err(ModelError::GradientMismatch(format!(
                        "at {p:?}: analytic {a} vs finite-difference {n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A vector field x ↦ ℝ^m.
#[derive(Clone)]
pub struct VectorField {
    eval: VecFn,
    name: String,
    dimension: usize,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .finish()
    }
}

impl VectorField {
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static>(
        name: impl Into<String>,
        dimension: usize,
        f: F,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            name: name.into(),
            dimension,
        }
    }

    pub fn zero(dimension: usize) -> Self {
        Self::from_fn("zero", dimension, move |_| vec![0.0; dimension])
    }

    pub fn constant(values: Vec<f64>) -> Self {
        let dim = values.len();
        Self::from_fn("constant", dim, move |_| values.clone())
    }

    /// `scale · e_axis`.
    pub fn scaled_axis(dimension: usize, axis: usize, scale: f64) -> Self {
        assert!(axis < dimension);
        Self::from_fn(format!("axis{axis}"), dimension, move |_| {
            let mut v = vec![0.0; dimension];
            v[axis] = scale;
            v
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let v = (self.eval)(x);
        debug_assert_eq!(v.len(), self.dimension, "vector field output dimension");
        v
    }
}
