//! JSON problem configuration.
//!
//! ```json
//! {
//!   "domain": { "shape": "interval", "params": { "a": 0.0, "b": 1.0 } },
//!   "frame": [ { "builtin": "axis", "params": { "axis": 0, "scale": 2.5066282746310002 } } ],
//!   "drift": { "builtin": "zero" },
//!   "potential": { "builtin": "constant", "params": { "value": -0.5 } },
//!   "source": { "expr": "x1*(1-x1)" },
//!   "boundary_data": { "builtin": "zero" },
//!   "diffusion_scale": 1.0,
//!   "exit_strategy": { "variant": "critical_distance", "params": { "speed": 1.0 } }
//! }
//! ```
//!
//! Every field entry is either `{"builtin": name, "params": {...}}` or
//! `{"expr": string}`; vector-valued expressions are comma-separated
//! component lists ("x2, -x1").

use serde::Deserialize;
use serde_json::Value;

use super::{
    Domain, ExitTimeStrategy, ModelError, ProblemSpec, ScalarField, Shape, VectorField,
};
use crate::expr;

#[derive(Debug, Clone, Deserialize)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    pub frame: Vec<FieldConfig>,
    pub drift: FieldConfig,
    pub potential: FieldConfig,
    pub source: FieldConfig,
    pub boundary_data: FieldConfig,
    pub diffusion_scale: f64,
    pub exit_strategy: StrategyConfig,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DomainConfig {
    pub shape: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StrategyConfig {
    pub variant: String,
    #[serde(default)]
    pub params: Value,
}

/// One field entry: a named builtin with parameters, or an expression.
#[derive(Debug, Clone, Deserialize)]
pub struct FieldConfig {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub expr: Option<String>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::InvalidConfig(e.to_string()))
    }
}

/// Build and eagerly validate a problem from a structured description.
pub fn make_problem(config: &ProblemConfig) -> Result<ProblemSpec, ModelError> {
    let domain = build_domain(&config.domain)?;
    let m = domain.dimension();
    let frame = config
        .frame
        .iter()
        .enumerate()
        .map(|(i, fc)| build_vector_field(fc, m, &format!("X{}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let drift = build_vector_field(&config.drift, m, "Y")?;
    let potential = build_scalar_field(&config.potential, m)?;
    let source = build_scalar_field(&config.source, m)?;
    let boundary_data = build_scalar_field(&config.boundary_data, m)?;
    let exit_strategy = build_strategy(&config.exit_strategy)?;
    let spec = ProblemSpec {
        domain,
        frame,
        drift,
        potential,
        source,
        boundary_data,
        diffusion_scale: config.diffusion_scale,
        exit_strategy,
    };
    spec.validate()?;
    Ok(spec)
}

fn get_f64(params: &Value, key: &str) -> Result<f64, ModelError> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| ModelError::InvalidConfig(format!("missing numeric parameter '{key}'")))
}

fn get_vec(params: &Value, key: &str) -> Result<Vec<f64>, ModelError> {
    params
        .get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_f64).collect::<Vec<_>>())
        .ok_or_else(|| ModelError::InvalidConfig(format!("missing array parameter '{key}'")))
}

fn build_domain(cfg: &DomainConfig) -> Result<Domain, ModelError> {
    let p = &cfg.params;
    match cfg.shape.as_str() {
        "interval" => Domain::new(
            1,
            Shape::Interval {
                a: get_f64(p, "a")?,
                b: get_f64(p, "b")?,
            },
        ),
        "box" => {
            let lo = get_vec(p, "lo")?;
            let hi = get_vec(p, "hi")?;
            let m = lo.len();
            Domain::new(m, Shape::Box { lo, hi })
        }
        "ball" => {
            let center = get_vec(p, "center")?;
            let m = center.len();
            Domain::new(
                m,
                Shape::Ball {
                    center,
                    radius: get_f64(p, "radius")?,
                },
            )
        }
        "annulus" => {
            let center = get_vec(p, "center")?;
            let m = center.len();
            Domain::new(
                m,
                Shape::Annulus {
                    center,
                    inner: get_f64(p, "inner")?,
                    outer: get_f64(p, "outer")?,
                },
            )
        }
        "half_space" => {
            let normal = get_vec(p, "normal")?;
            let m = normal.len();
            Domain::new(
                m,
                Shape::HalfSpace {
                    normal,
                    offset: get_f64(p, "offset")?,
                },
            )
        }
        "full_space" => {
            let m = get_f64(p, "dimension")? as usize;
            Domain::new(m, Shape::FullSpace)
        }
        other => Err(ModelError::UnknownShape(other.to_string())),
    }
}

fn build_strategy(cfg: &StrategyConfig) -> Result<ExitTimeStrategy, ModelError> {
    let s = match cfg.variant.as_str() {
        "critical_distance" => ExitTimeStrategy::CriticalDistance {
            speed: get_f64(&cfg.params, "speed")?,
        },
        "fixed_energy" => ExitTimeStrategy::FixedEnergy {
            energy: get_f64(&cfg.params, "energy")?,
        },
        "stochastic_baseline" => ExitTimeStrategy::StochasticBaseline,
        other => {
            return Err(ModelError::InvalidConfig(format!(
                "unknown exit strategy '{other}'"
            )))
        }
    };
    s.validate()?;
    Ok(s)
}

fn build_scalar_field(cfg: &FieldConfig, m: usize) -> Result<ScalarField, ModelError> {
    if let Some(text) = &cfg.expr {
        let e = expr::parse(text, m)
            .map_err(|err| ModelError::InvalidField(format!("'{text}': {err}")))?;
        return Ok(ScalarField::from_expression(e));
    }
    let Some(name) = &cfg.builtin else {
        return Err(ModelError::InvalidField(
            "field entry needs 'builtin' or 'expr'".into(),
        ));
    };
    match name.as_str() {
        "zero" => Ok(ScalarField::zero()),
        "one" => Ok(ScalarField::constant(1.0)),
        "constant" => Ok(ScalarField::constant(get_f64(&cfg.params, "value")?)),
        "linear" => {
            let coeffs = get_vec(&cfg.params, "coeffs")?;
            let offset = cfg.params.get("offset").and_then(Value::as_f64).unwrap_or(0.0);
            if coeffs.len() != m {
                return Err(ModelError::DimensionMismatch(
                    "linear field coefficients must match the dimension".into(),
                ));
            }
            Ok(ScalarField::from_fn(move |x| {
                offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>()
            }))
        }
        "gaussian_bump" => {
            let center = get_vec(&cfg.params, "center")?;
            let width = get_f64(&cfg.params, "width")?;
            let amplitude = cfg
                .params
                .get("amplitude")
                .and_then(Value::as_f64)
                .unwrap_or(1.0);
            if center.len() != m {
                return Err(ModelError::DimensionMismatch(
                    "gaussian_bump center must match the dimension".into(),
                ));
            }
            if width <= 0.0 {
                return Err(ModelError::NonPositiveParameter("gaussian_bump width".into()));
            }
            Ok(ScalarField::from_fn(move |x| {
                let r2: f64 = x
                    .iter()
                    .zip(&center)
                    .map(|(xi, c)| (xi - c) * (xi - c))
                    .sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }))
        }
        other => Err(ModelError::InvalidField(format!(
            "unknown scalar builtin '{other}'"
        ))),
    }
}

fn build_vector_field(cfg: &FieldConfig, m: usize, name: &str) -> Result<VectorField, ModelError> {
    if let Some(text) = &cfg.expr {
        let comps = expr::parse_list(text, m)
            .map_err(|err| ModelError::InvalidField(format!("'{text}': {err}")))?;
        if comps.len() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "vector expression '{text}' has {} components, expected {m}",
                comps.len()
            )));
        }
        return Ok(VectorField::from_fn(name.to_string(), m, move |x| {
            comps
                .iter()
                .map(|c| c.evaluate(x).unwrap_or(f64::NAN))
                .collect()
        }));
    }
    let Some(builtin) = &cfg.builtin else {
        return Err(ModelError::InvalidField(
            "field entry needs 'builtin' or 'expr'".into(),
        ));
    };
    match builtin.as_str() {
        "zero" => Ok(VectorField::zero(m)),
        "constant" => {
            let values = get_vec(&cfg.params, "values")?;
            if values.len() != m {
                return Err(ModelError::DimensionMismatch(
                    "constant vector length must match the dimension".into(),
                ));
            }
            Ok(VectorField::constant(values))
        }
        "axis" => {
            let axis = get_f64(&cfg.params, "axis")? as usize;
            let scale = cfg.params.get("scale").and_then(Value::as_f64).unwrap_or(1.0);
            if axis >= m {
                return Err(ModelError::DimensionMismatch(format!(
                    "axis {axis} out of range for dimension {m}"
                )));
            }
            Ok(VectorField::scaled_axis(m, axis, scale))
        }
        other => Err(ModelError::InvalidField(format!(
            "unknown vector builtin '{other}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = r#"{
        "domain": {"shape": "interval", "params": {"a": 0.0, "b": 1.0}},
        "frame": [{"builtin": "axis", "params": {"axis": 0, "scale": 2.5066282746310002}}],
        "drift": {"builtin": "zero"},
        "potential": {"builtin": "zero"},
        "source": {"builtin": "one"},
        "boundary_data": {"builtin": "zero"},
        "diffusion_scale": 1.0,
        "exit_strategy": {"variant": "critical_distance", "params": {"speed": 1.0}}
    }"#;

    #[test]
    fn canonical_interval_config_builds() {
        let cfg = ProblemConfig::from_json(CANONICAL).unwrap();
        let p = make_problem(&cfg).unwrap();
        assert_eq!(p.dimension(), 1);
        // Generator is ½ d²/dx²: L[x²] = 1.
        let l = p.apply_generator(|x| x[0] * x[0], &[0.4], 1e-4);
        assert!((l - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ball_with_orthonormal_frame_builds() {
        let text = r#"{
            "domain": {"shape": "ball", "params": {"center": [0.0, 0.0], "radius": 1.0}},
            "frame": [
                {"builtin": "axis", "params": {"axis": 0}},
                {"builtin": "axis", "params": {"axis": 1}}
            ],
            "drift": {"builtin": "zero"},
            "potential": {"builtin": "zero"},
            "source": {"builtin": "zero"},
            "boundary_data": {"builtin": "zero"},
            "diffusion_scale": 6.283185307179586,
            "exit_strategy": {"variant": "stochastic_baseline"}
        }"#;
        let p = make_problem(&ProblemConfig::from_json(text).unwrap()).unwrap();
        assert_eq!(p.dimension(), 2);
    }

    #[test]
    fn dependent_frame_is_rejected() {
        let text = r#"{
            "domain": {"shape": "ball", "params": {"center": [0.0, 0.0], "radius": 1.0}},
            "frame": [
                {"builtin": "axis", "params": {"axis": 0, "scale": 1.0}},
                {"builtin": "axis", "params": {"axis": 0, "scale": 2.0}}
            ],
            "drift": {"builtin": "zero"},
            "potential": {"builtin": "zero"},
            "source": {"builtin": "zero"},
            "boundary_data": {"builtin": "zero"},
            "diffusion_scale": 1.0,
            "exit_strategy": {"variant": "critical_distance", "params": {"speed": 1.0}}
        }"#;
        let err = make_problem(&ProblemConfig::from_json(text).unwrap()).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateFrame(_)), "{err}");
    }

    #[test]
    fn unknown_shape_and_bad_scale() {
        let mut cfg = ProblemConfig::from_json(CANONICAL).unwrap();
        cfg.domain.shape = "pentagon".into();
        assert!(matches!(
            make_problem(&cfg),
            Err(ModelError::UnknownShape(_))
        ));
        let mut cfg = ProblemConfig::from_json(CANONICAL).unwrap();
        cfg.diffusion_scale = -1.0;
        assert!(matches!(
            make_problem(&cfg),
            Err(ModelError::NonPositiveParameter(_))
        ));
    }

    #[test]
    fn expression_fields_parse() {
        let mut cfg = ProblemConfig::from_json(CANONICAL).unwrap();
        cfg.source = FieldConfig {
            builtin: None,
            params: Value::Null,
            expr: Some("x1*(1-x1)".into()),
        };
        let p = make_problem(&cfg).unwrap();
        assert!((p.source.eval(&[0.5]) - 0.25).abs() < 1e-15);
    }
}
