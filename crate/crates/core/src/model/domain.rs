//! Built-in domain shapes with exact signed distances.

use super::ModelError;

/// Geometric shape of the region U.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// m = 1 only.
    Interval { a: f64, b: f64 },
    /// Axis-aligned box with per-coordinate bounds.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// Interior is where `normal · x > offset`; `normal` is the inward unit
    /// normal of the boundary hyperplane.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// No boundary; the signed distance is -∞ everywhere.
    FullSpace,
}

/// A domain: dimension plus shape, with exact signed-distance and
/// inward-normal evaluators for every built-in shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    dimension: usize,
    shape: Shape,
}

impl Domain {
    pub fn new(dimension: usize, shape: Shape) -> Result<Self, ModelError> {
        if dimension == 0 {
            return Err(ModelError::DimensionMismatch(
                "dimension must be at least 1".into(),
            ));
        }
        match &shape {
            Shape::Interval { a, b } => {
                if dimension != 1 {
                    return Err(ModelError::DimensionMismatch(
                        "interval domains are one-dimensional".into(),
                    ));
                }
                if a >= b {
                    return Err(ModelError::InvalidConfig(format!(
                        "interval requires a < b (got [{a}, {b}])"
                    )));
                }
            }
            Shape::Box { lo, hi } => {
                if lo.len() != dimension || hi.len() != dimension {
                    return Err(ModelError::DimensionMismatch(
                        "box bounds must match the dimension".into(),
                    ));
                }
                if lo.iter().zip(hi).any(|(l, h)| l >= h) {
                    return Err(ModelError::InvalidConfig(
                        "box requires lo < hi in every coordinate".into(),
                    ));
                }
            }
            Shape::Ball { center, radius } => {
                if center.len() != dimension {
                    return Err(ModelError::DimensionMismatch(
                        "ball center must match the dimension".into(),
                    ));
                }
                if *radius <= 0.0 {
                    return Err(ModelError::NonPositiveParameter("ball radius".into()));
                }
            }
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                if center.len() != dimension {
                    return Err(ModelError::DimensionMismatch(
                        "annulus center must match the dimension".into(),
                    ));
                }
                if *inner <= 0.0 || *outer <= *inner {
                    return Err(ModelError::InvalidConfig(
                        "annulus requires 0 < inner < outer".into(),
                    ));
                }
            }
            Shape::HalfSpace { normal, .. } => {
                if normal.len() != dimension {
                    return Err(ModelError::DimensionMismatch(
                        "half-space normal must match the dimension".into(),
                    ));
                }
                let norm = norm(normal);
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(ModelError::InvalidConfig(
                        "half-space normal must be a unit vector".into(),
                    ));
                }
            }
            Shape::FullSpace => {}
        }
        Ok(Self { dimension, shape })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn has_boundary(&self) -> bool {
        !matches!(self.shape, Shape::FullSpace)
    }

    /// Signed distance to the boundary: negative inside, zero on the
    /// boundary, positive outside. Exact for every built-in shape.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.shape {
            Shape::Interval { a, b } => (a - x[0]).max(x[0] - b),
            Shape::Box { lo, hi } => {
                let q: Vec<f64> = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(xi, (l, h))| (l - xi).max(xi - h))
                    .collect();
                let inside_max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if inside_max <= 0.0 {
                    inside_max
                } else {
                    norm(&q.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
                }
            }
            Shape::Ball { center, radius } => dist(x, center) - radius,
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                (r - outer).max(inner - r)
            }
            Shape::HalfSpace { normal, offset } => offset - dot(normal, x),
            Shape::FullSpace => f64::NEG_INFINITY,
        }
    }

    /// Inward unit normal at a boundary point.
    pub fn inward_normal(&self, x: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Interval { a, b } => {
                let to_a = (x[0] - a).abs();
                let to_b = (x[0] - b).abs();
                vec![if to_a <= to_b { 1.0 } else { -1.0 }]
            }
            Shape::Box { lo, hi } => {
                // Nearest face determines the normal.
                let mut best = f64::INFINITY;
                let mut n = vec![0.0; x.len()];
                for i in 0..x.len() {
                    let d_lo = (x[i] - lo[i]).abs();
                    let d_hi = (x[i] - hi[i]).abs();
                    if d_lo < best {
                        best = d_lo;
                        n.iter_mut().for_each(|v| *v = 0.0);
                        n[i] = 1.0;
                    }
                    if d_hi < best {
                        best = d_hi;
                        n.iter_mut().for_each(|v| *v = 0.0);
                        n[i] = -1.0;
                    }
                }
                n
            }
            Shape::Ball { center, .. } => unit_from_to(x, center),
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                if (r - inner).abs() <= (outer - r).abs() {
                    // Inner boundary: inward means away from the center.
                    unit_from_to(center, x)
                } else {
                    unit_from_to(x, center)
                }
            }
            Shape::HalfSpace { normal, .. } => normal.clone(),
            Shape::FullSpace => panic!("full space has no boundary"),
        }
    }

    /// Nearest boundary point (the metric projection). Undefined only at
    /// equidistant tie points, where one representative is returned; see
    /// [`crate::critical::exit_profile`] for the full candidate set.
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Interval { a, b } => {
                if (x[0] - a).abs() <= (x[0] - b).abs() {
                    vec![*a]
                } else {
                    vec![*b]
                }
            }
            Shape::Box { lo, hi } => {
                let d = self.signed_distance(x);
                if d >= 0.0 {
                    // Outside or on boundary: clamp into the box.
                    return x
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(xi, (l, h))| xi.clamp(*l, *h))
                        .collect();
                }
                // Inside: move to the nearest face.
                let mut best = f64::INFINITY;
                let mut proj = x.to_vec();
                for i in 0..x.len() {
                    for target in [lo[i], hi[i]] {
                        let gap = (x[i] - target).abs();
                        if gap < best {
                            best = gap;
                            proj = x.to_vec();
                            proj[i] = target;
                        }
                    }
                }
                proj
            }
            Shape::Ball { center, radius } => {
                let dir = unit_from_to(center, x);
                center.iter().zip(&dir).map(|(c, d)| c + radius * d).collect()
            }
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                let target = if (r - inner).abs() <= (outer - r).abs() {
                    *inner
                } else {
                    *outer
                };
                let dir = unit_from_to(center, x);
                center.iter().zip(&dir).map(|(c, d)| c + target * d).collect()
            }
            Shape::HalfSpace { normal, offset } => {
                let d = dot(normal, x) - offset;
                x.iter().zip(normal).map(|(xi, n)| xi - d * n).collect()
            }
            Shape::FullSpace => panic!("full space has no boundary"),
        }
    }

    /// A deterministic cloud of interior probe points, used for eager
    /// validation (frame independence, gradient checks).
    pub fn interior_probes(&self, count: usize) -> Vec<Vec<f64>> {
        let m = self.dimension;
        let mut out = Vec::with_capacity(count);
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next_unit = || {
            // xorshift64*: adequate for probe placement.
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545_f491_4f6c_dd1d) >> 11) as f64 / (1u64 << 53) as f64
        };
        let reference = self.reference_interior_point();
        while out.len() < count {
            let candidate: Vec<f64> = match &self.shape {
                Shape::Interval { a, b } => vec![a + (b - a) * next_unit()],
                Shape::Box { lo, hi } => lo
                    .iter()
                    .zip(hi)
                    .map(|(l, h)| l + (h - l) * next_unit())
                    .collect(),
                Shape::Ball { center, radius } | Shape::Annulus { center, outer: radius, .. } => {
                    center
                        .iter()
                        .map(|c| c + radius * (2.0 * next_unit() - 1.0))
                        .collect()
                }
                Shape::HalfSpace { .. } | Shape::FullSpace => (0..m)
                    .map(|i| reference[i] + 2.0 * next_unit() - 1.0)
                    .collect(),
            };
            if !self.has_boundary() || self.signed_distance(&candidate) < -1e-9 {
                out.push(candidate);
            }
        }
        out
    }

    /// A canonical interior point.
    pub fn reference_interior_point(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Interval { a, b } => vec![0.5 * (a + b)],
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            Shape::Ball { center, .. } => center.clone(),
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let mut p = center.clone();
                p[0] += 0.5 * (inner + outer);
                p
            }
            Shape::HalfSpace { normal, offset } => {
                normal.iter().map(|n| n * (offset + 1.0)).collect()
            }
            Shape::FullSpace => vec![0.0; self.dimension],
        }
    }
}

/// Signed distance as a free function (mirrors `Domain::signed_distance`).
pub fn signed_distance(domain: &Domain, x: &[f64]) -> f64 {
    domain.signed_distance(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Unit vector pointing from `from` to `to`; falls back to e₁ when the two
/// points coincide (degenerate projection at a center).
fn unit_from_to(from: &[f64], to: &[f64]) -> Vec<f64> {
    let d = dist(from, to);
    if d < 1e-300 {
        let mut e = vec![0.0; from.len()];
        e[0] = 1.0;
        return e;
    }
    to.iter().zip(from).map(|(t, f)| (t - f) / d).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval01() -> Domain {
        Domain::new(1, Shape::Interval { a: 0.0, b: 1.0 }).unwrap()
    }

    fn unit_ball2() -> Domain {
        Domain::new(
            2,
            Shape::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn signed_distance_fixtures() {
        assert_eq!(interval01().signed_distance(&[0.3]), -0.3);
        assert_eq!(unit_ball2().signed_distance(&[0.0, 0.0]), -1.0);
        let half = Domain::new(
            2,
            Shape::HalfSpace {
                normal: vec![1.0, 0.0],
                offset: 0.0,
            },
        )
        .unwrap();
        assert_eq!(half.signed_distance(&[2.0, 5.0]), -2.0);
    }

    #[test]
    fn boundary_normals_are_unit() {
        let shapes: Vec<Domain> = vec![
            interval01(),
            unit_ball2(),
            Domain::new(
                2,
                Shape::Annulus {
                    center: vec![0.0, 0.0],
                    inner: 0.5,
                    outer: 2.0,
                },
            )
            .unwrap(),
            Domain::new(
                2,
                Shape::Box {
                    lo: vec![0.0, 0.0],
                    hi: vec![1.0, 2.0],
                },
            )
            .unwrap(),
        ];
        for d in &shapes {
            for p in d.interior_probes(32) {
                let b = d.project_to_boundary(&p);
                assert!(
                    d.signed_distance(&b).abs() < 1e-10,
                    "projection off boundary for {:?}: {:?} -> {:?}",
                    d.shape(),
                    p,
                    b
                );
                let n = d.inward_normal(&b);
                let len = norm(&n);
                assert!((len - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lipschitz_on_sampled_pairs() {
        let domains = vec![
            interval01(),
            unit_ball2(),
            Domain::new(
                3,
                Shape::Box {
                    lo: vec![-1.0, -1.0, -1.0],
                    hi: vec![1.0, 2.0, 3.0],
                },
            )
            .unwrap(),
            Domain::new(
                2,
                Shape::Annulus {
                    center: vec![0.5, -0.5],
                    inner: 0.3,
                    outer: 1.7,
                },
            )
            .unwrap(),
            Domain::new(
                2,
                Shape::HalfSpace {
                    normal: vec![0.6, 0.8],
                    offset: -0.2,
                },
            )
            .unwrap(),
        ];
        let mut state = 1234_5678_u64;
        let mut next = || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545_f491_4f6c_dd1d) >> 11) as f64 / (1u64 << 53) as f64
        };
        for d in &domains {
            let m = d.dimension();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..m).map(|_| 6.0 * next() - 3.0).collect();
                let y: Vec<f64> = (0..m).map(|_| 6.0 * next() - 3.0).collect();
                let lhs = (d.signed_distance(&x) - d.signed_distance(&y)).abs();
                let rhs = dist(&x, &y) + 1e-12;
                assert!(
                    lhs <= rhs,
                    "Lipschitz violated for {:?}: |d(x)-d(y)|={lhs} > |x-y|={rhs}",
                    d.shape()
                );
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Domain::new(2, Shape::Interval { a: 0.0, b: 1.0 }).is_err());
        assert!(Domain::new(
            2,
            Shape::Ball {
                center: vec![0.0, 0.0],
                radius: -1.0
            }
        )
        .is_err());
        assert!(Domain::new(
            2,
            Shape::HalfSpace {
                normal: vec![2.0, 0.0],
                offset: 0.0
            }
        )
        .is_err());
    }
}
