//! Distance kernels between embedding vectors and their gradients.
//!
//! Kernels operate on plain slices so callers holding rows of a larger
//! buffer need not copy; [`Vector`] is the validated owned form.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    #[default]
    Euclidean,
    Chebyshev,
    Cosine,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [
        DistanceKind::Euclidean,
        DistanceKind::Chebyshev,
        DistanceKind::Cosine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Chebyshev => "chebyshev",
            DistanceKind::Cosine => "cosine",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(DistanceKind::Euclidean),
            "chebyshev" => Ok(DistanceKind::Chebyshev),
            "cosine" => Ok(DistanceKind::Cosine),
            other => Err(Error::Config(format!(
                "unknown distance '{other}' (expected euclidean, chebyshev or cosine)"
            ))),
        }
    }
}

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidVector("dimension must be positive".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVector(format!(
                "non-finite entry {} at index {i}",
                values[i]
            )));
        }
        Ok(Vector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Vector::new(values)
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Index of the largest absolute coordinate difference, lowest index on ties.
fn chebyshev_argmax(a: &[f64], b: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let d = (x - y).abs();
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn distance(kind: DistanceKind, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    match kind {
        DistanceKind::Euclidean => Ok(a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()),
        DistanceKind::Chebyshev => Ok(chebyshev_argmax(a, b).1.max(0.0)),
        DistanceKind::Cosine => {
            let (na, nb) = (norm(a), norm(b));
            if na == 0.0 || nb == 0.0 {
                return Err(Error::ZeroNorm);
            }
            // Rounding can push the ratio a hair outside [-1, 1].
            let cos = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
            Ok(1.0 - cos)
        }
    }
}

/// Returns `(dD/da, dD/db)`.
///
/// Euclidean at coincident points and Chebyshev at ties use the subgradient
/// conventions: zero, and the lowest-index maximal coordinate respectively.
pub fn distance_grad(kind: DistanceKind, a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(a, b)?;
    let dim = a.len();
    let grad_a = match kind {
        DistanceKind::Euclidean => {
            let d = distance(kind, a, b)?;
            if d == 0.0 {
                vec![0.0; dim]
            } else {
                a.iter().zip(b).map(|(x, y)| (x - y) / d).collect()
            }
        }
        DistanceKind::Chebyshev => {
            let mut g = vec![0.0; dim];
            if dim > 0 {
                let (i, d) = chebyshev_argmax(a, b);
                if d > 0.0 {
                    g[i] = (a[i] - b[i]).signum();
                }
            }
            g
        }
        DistanceKind::Cosine => {
            let (na, nb) = (norm(a), norm(b));
            if na == 0.0 || nb == 0.0 {
                return Err(Error::ZeroNorm);
            }
            let ab = dot(a, b);
            let inv = 1.0 / (na * nb);
            let ga: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(x, y)| -(y * inv - ab * x * inv / (na * na)))
                .collect();
            let gb: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(x, y)| -(x * inv - ab * y * inv / (nb * nb)))
                .collect();
            return Ok((ga, gb));
        }
    };
    // Euclidean and Chebyshev depend on a - b only.
    let grad_b = grad_a.iter().map(|g| -g).collect();
    Ok((grad_a, grad_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn distance_examples() {
        let d = distance(DistanceKind::Euclidean, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(d, 5.0);
        let d = distance(DistanceKind::Chebyshev, &[1.0, 2.0], &[4.0, 0.0]).unwrap();
        assert_eq!(d, 3.0);
        let d = distance(DistanceKind::Cosine, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(d, 1.0);
        let v = [0.3, -1.2, 4.0];
        assert_relative_eq!(distance(DistanceKind::Cosine, &v, &v).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_and_zero_norm() {
        assert!(matches!(
            distance(DistanceKind::Euclidean, &[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            distance(DistanceKind::Cosine, &[0.0, 0.0], &[1.0, 2.0]),
            Err(Error::ZeroNorm)
        ));
        assert!(matches!(
            distance_grad(DistanceKind::Cosine, &[1.0, 2.0], &[0.0, 0.0]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn vector_rejects_bad_input() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![1.0, f64::INFINITY]).is_err());
        assert_eq!(&*Vector::new(vec![1.0, 2.0]).unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in DistanceKind::ALL {
            assert_eq!(kind.as_str().parse::<DistanceKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.as_str()));
            assert_eq!(serde_json::from_str::<DistanceKind>(&json).unwrap(), kind);
        }
        assert!("manhattan".parse::<DistanceKind>().is_err());
    }

    #[test]
    fn euclidean_grad_examples() {
        let (ga, gb) = distance_grad(DistanceKind::Euclidean, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_relative_eq!(ga[0], -0.6, epsilon = 1e-15);
        assert_relative_eq!(ga[1], -0.8, epsilon = 1e-15);
        assert_eq!(gb, vec![0.6, 0.8]);
        let v = [1.0, -2.0, 0.5];
        let (ga, gb) = distance_grad(DistanceKind::Euclidean, &v, &v).unwrap();
        assert!(ga.iter().chain(&gb).all(|g| *g == 0.0));
    }

    #[test]
    fn chebyshev_tie_breaks_to_lowest_index() {
        let (ga, gb) = distance_grad(DistanceKind::Chebyshev, &[0.0, 0.0, 0.0], &[-2.0, 2.0, 1.0]).unwrap();
        assert_eq!(ga, vec![1.0, 0.0, 0.0]);
        assert_eq!(gb, vec![-1.0, 0.0, 0.0]);
    }

    fn central_diff(kind: DistanceKind, a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
        (0..a.len())
            .map(|i| {
                let mut p = a.to_vec();
                let mut m = a.to_vec();
                p[i] += h;
                m[i] -= h;
                (distance(kind, &p, b).unwrap() - distance(kind, &m, b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn cosine_grad_matches_finite_differences_8d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (ga, gb) = distance_grad(DistanceKind::Cosine, &a, &b).unwrap();
        let fa = central_diff(DistanceKind::Cosine, &a, &b, 1e-5);
        let fb = central_diff(DistanceKind::Cosine, &b, &a, 1e-5);
        for (g, f) in ga.iter().zip(&fa).chain(gb.iter().zip(&fb)) {
            assert!((g - f).abs() <= 1e-6 * f.abs().max(1e-3), "{g} vs {f}");
        }
    }

    fn vec_pair(dim: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        dim.prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative((a, b) in vec_pair(1..32)) {
            for kind in DistanceKind::ALL {
                let ab = distance(kind, &a, &b);
                let ba = distance(kind, &b, &a);
                match (ab, ba) {
                    (Ok(x), Ok(y)) => {
                        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                        prop_assert!(x >= 0.0);
                        if kind == DistanceKind::Cosine {
                            prop_assert!(x <= 2.0);
                        }
                    }
                    (Err(Error::ZeroNorm), Err(Error::ZeroNorm)) => {}
                    other => prop_assert!(false, "asymmetric result {:?}", other),
                }
            }
            prop_assert_eq!(distance(DistanceKind::Euclidean, &a, &a).unwrap(), 0.0);
            prop_assert_eq!(distance(DistanceKind::Chebyshev, &a, &a).unwrap(), 0.0);
        }

        #[test]
        fn triangle_inequality(
            (a, b) in vec_pair(1..16),
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = (0..a.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
            for kind in [DistanceKind::Euclidean, DistanceKind::Chebyshev] {
                let ab = distance(kind, &a, &b).unwrap();
                let bc = distance(kind, &b, &c).unwrap();
                let ac = distance(kind, &a, &c).unwrap();
                prop_assert!(ac <= ab + bc + 1e-12);
            }
        }
    }
}
