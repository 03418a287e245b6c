//! Loss algebra: reconstruction cross-entropy, the sampled class-aware
//! contrastive loss, the exact class-separation statistic it estimates, and
//! the C-weighted combination of the two training losses.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::distances::{distance, distance_grad, DistanceKind};
use crate::error::{Error, Result};

/// Floor applied to decoder probabilities before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarolConfig {
    /// Documents sampled per class.
    pub n: usize,
    pub distance: DistanceKind,
    pub seed: u64,
}

impl Default for CarolConfig {
    fn default() -> Self {
        CarolConfig {
            n: 3,
            distance: DistanceKind::Euclidean,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub carol: f64,
    pub recon: f64,
    pub total: f64,
    pub c: f64,
}

/// Cross-entropy `-sum p_i ln max(q_i, 1e-12)` between the normalised
/// original counts `p` and the decoder distribution `q`, with its exact
/// gradient in `q` (zero wherever the clamp is active).
pub fn recon_loss(decoder_output: &[f64], original_features: &[f64]) -> Result<(f64, Vec<f64>)> {
    if decoder_output.len() != original_features.len() {
        return Err(Error::DimensionMismatch {
            expected: original_features.len(),
            actual: decoder_output.len(),
        });
    }
    if original_features.iter().any(|f| *f < 0.0 || !f.is_finite()) {
        return Err(Error::Data("original features must be finite and nonnegative".into()));
    }
    let mass: f64 = original_features.iter().sum();
    if mass <= 0.0 {
        return Err(Error::Data("original features sum to zero".into()));
    }
    let mut loss = 0.0;
    let grad = decoder_output
        .iter()
        .zip(original_features)
        .map(|(q, f)| {
            let p = f / mass;
            if p == 0.0 {
                return 0.0;
            }
            if *q > LOG_CLAMP {
                loss -= p * q.ln();
                -p / q
            } else {
                loss -= p * LOG_CLAMP.ln();
                0.0
            }
        })
        .collect();
    Ok((loss, grad))
}

/// Weight applied to same-class pair distances in a sample of `sample_len`
/// embeddings: `1 / (sample_len - 1) + 1`.
pub fn correction_coefficient(sample_len: usize) -> f64 {
    1.0 / (sample_len as f64 - 1.0) + 1.0
}

fn check_sample<E: AsRef<[f64]>>(embeddings: &[E], labels: &[Label]) -> Result<()> {
    if embeddings.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: embeddings.len(),
            actual: labels.len(),
        });
    }
    if let Some(l) = labels.iter().find(|l| **l > 1) {
        return Err(Error::Data(format!("labels must be 0 or 1, got {l}")));
    }
    Ok(())
}

/// Sampled class-aware contrastive loss over a balanced sample.
///
/// Every unordered pair contributes `-D` when its labels differ and
/// `D * correction_coefficient(2n)` when they agree; the sum is divided by
/// the pair count `n (2n - 1)`. Returns the loss and its gradient with
/// respect to each embedding.
pub fn carol_loss<E: AsRef<[f64]>>(
    embeddings: &[E],
    labels: &[Label],
    cfg: &CarolConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_sample(embeddings, labels)?;
    let len = embeddings.len();
    if len < 2 {
        return Err(Error::Data(format!("need at least 2 embeddings, got {len}")));
    }
    let ones = labels.iter().filter(|l| **l == 1).count();
    if ones != cfg.n || len - ones != cfg.n {
        return Err(Error::Data(format!(
            "sample not balanced: expected {} per class, got {} and {}",
            cfg.n,
            len - ones,
            ones
        )));
    }
    let dim = embeddings[0].as_ref().len();
    let same_weight = correction_coefficient(len);
    let mut loss = 0.0;
    let mut pairs = 0usize;
    let mut grads = vec![vec![0.0; dim]; len];
    for i in 0..len {
        for j in i + 1..len {
            let (a, b) = (embeddings[i].as_ref(), embeddings[j].as_ref());
            let w = if labels[i] != labels[j] { -1.0 } else { same_weight };
            loss += w * distance(cfg.distance, a, b)?;
            let (ga, gb) = distance_grad(cfg.distance, a, b)?;
            for k in 0..dim {
                grads[i][k] += w * ga[k];
                grads[j][k] += w * gb[k];
            }
            pairs += 1;
        }
    }
    let m = pairs as f64;
    grads.iter_mut().flatten().for_each(|g| *g /= m);
    Ok((loss / m, grads))
}

/// Unweighted mean distances over the unordered cross-class and same-class
/// pairs of a sample: the raw terms `carol_loss` combines.
pub fn sampled_pair_means<E: AsRef<[f64]>>(
    embeddings: &[E],
    labels: &[Label],
    kind: DistanceKind,
) -> Result<(f64, f64)> {
    check_sample(embeddings, labels)?;
    let (mut cross, mut n_cross, mut same, mut n_same) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            let d = distance(kind, embeddings[i].as_ref(), embeddings[j].as_ref())?;
            if labels[i] != labels[j] {
                cross += d;
                n_cross += 1;
            } else {
                same += d;
                n_same += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok((mean(cross, n_cross), mean(same, n_same)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSeparation {
    /// Mean distance over all ordered cross-class pairs.
    pub interclass: f64,
    /// Sum of the two within-class means over all ordered pairs, self-pairs
    /// included.
    pub intraclass: f64,
    /// `interclass - intraclass`.
    pub separation: f64,
}

/// Exact O(N^2) class separation over the full embedding set.
///
/// Within-class means divide by `|X_c|^2` and include the zero self-pairs,
/// so they are `(|X_c| - 1) / |X_c|` times the mean over distinct pairs.
pub fn exact_class_separation<E: AsRef<[f64]>>(
    embeddings: &[E],
    labels: &[Label],
    kind: DistanceKind,
) -> Result<ClassSeparation> {
    check_sample(embeddings, labels)?;
    let class = |c: Label| -> Vec<&[f64]> {
        embeddings
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == c)
            .map(|(e, _)| e.as_ref())
            .collect()
    };
    let (x0, x1) = (class(0), class(1));
    if x0.is_empty() || x1.is_empty() {
        return Err(Error::Data("both classes must be non-empty".into()));
    }
    let mean_over = |xs: &[&[f64]], ys: &[&[f64]]| -> Result<f64> {
        let mut sum = 0.0;
        for x in xs {
            for y in ys {
                sum += distance(kind, x, y)?;
            }
        }
        Ok(sum / (xs.len() * ys.len()) as f64)
    };
    let interclass = mean_over(&x0, &x1)?;
    let intraclass = mean_over(&x0, &x0)? + mean_over(&x1, &x1)?;
    Ok(ClassSeparation {
        interclass,
        intraclass,
        separation: interclass - intraclass,
    })
}

/// `total = c * carol + (1 - c) * recon`.
pub fn combined_loss(c: f64, carol: f64, recon: f64) -> Result<LossBreakdown> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Config(format!("c must lie in [0, 1], got {c}")));
    }
    Ok(LossBreakdown {
        carol,
        recon,
        total: c * carol + (1.0 - c) * recon,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn cfg(n: usize, distance: DistanceKind) -> CarolConfig {
        CarolConfig { n, distance, seed: 0 }
    }

    #[test]
    fn recon_loss_examples() {
        let p = [1.0, 1.0, 1.0, 1.0];
        let q = [0.25; 4];
        let (l, _) = recon_loss(&q, &p).unwrap();
        assert_relative_eq!(l, 4f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(l, 1.3863, epsilon = 1e-4);

        let (l, g) = recon_loss(&[0.9, 0.05, 0.05], &[3.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(l, -(0.9f64.ln()), epsilon = 1e-15);
        assert_relative_eq!(l, 0.1054, epsilon = 1e-4);
        assert_relative_eq!(g[0], -1.0 / 0.9, epsilon = 1e-15);
        assert_eq!(&g[1..], &[0.0, 0.0]);
    }

    #[test]
    fn recon_loss_clamps_empty_buckets() {
        let (l, g) = recon_loss(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(l, -0.5 * LOG_CLAMP.ln(), epsilon = 1e-12);
        assert_eq!(g, vec![-0.5, 0.0]);
    }

    #[test]
    fn recon_loss_errors() {
        assert!(matches!(recon_loss(&[0.5, 0.5], &[0.0, 0.0]), Err(Error::Data(_))));
        assert!(recon_loss(&[0.5, 0.5], &[1.0]).is_err());
        assert!(recon_loss(&[0.5, 0.5], &[-1.0, 2.0]).is_err());
    }

    #[test]
    fn carol_single_cross_pair() {
        let e = [vec![0.0, 0.0], vec![3.0, 4.0]];
        let (l, g) = carol_loss(&e, &[0, 1], &cfg(1, DistanceKind::Euclidean)).unwrap();
        assert_eq!(l, -5.0);
        assert_relative_eq!(g[0][0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(g[1][1], -0.8, epsilon = 1e-15);
    }

    #[test]
    fn carol_identical_embeddings_is_zero() {
        let e = vec![vec![0.3, -0.2, 0.9]; 6];
        let labels = [0, 1, 0, 1, 1, 0];
        for kind in [DistanceKind::Euclidean, DistanceKind::Chebyshev] {
            let (l, g) = carol_loss(&e, &labels, &cfg(3, kind)).unwrap();
            assert_eq!(l, 0.0);
            assert!(g.iter().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn correction_at_six_is_one_point_two() {
        assert_relative_eq!(correction_coefficient(6), 1.2, epsilon = 1e-15);
    }

    #[test]
    fn carol_rejects_bad_samples() {
        let e = vec![vec![1.0]; 4];
        let c = cfg(2, DistanceKind::Euclidean);
        assert!(carol_loss(&e, &[0, 0, 0, 1], &c).is_err());
        assert!(carol_loss(&e[..1], &[0], &cfg(1, DistanceKind::Euclidean)).is_err());
        assert!(carol_loss(&e, &[0, 1, 0], &c).is_err());
        assert!(carol_loss(&e, &[0, 1, 0, 2], &c).is_err());
    }

    #[test]
    fn exact_separation_single_points() {
        let e = [vec![0.0, 0.0], vec![3.0, 4.0]];
        let s = exact_class_separation(&e, &[0, 1], DistanceKind::Euclidean).unwrap();
        assert_eq!((s.interclass, s.intraclass, s.separation), (5.0, 0.0, 5.0));
        assert!(exact_class_separation(&e, &[0, 0], DistanceKind::Euclidean).is_err());
    }

    #[test]
    fn self_pairs_dilute_intraclass_mean() {
        // Two points at distance 2: distinct-pair mean is 2, the diluted one 1.
        let e = [vec![0.0], vec![2.0], vec![10.0]];
        let s = exact_class_separation(&e, &[0, 0, 1], DistanceKind::Euclidean).unwrap();
        assert_eq!(s.intraclass, 1.0);
        assert_eq!(s.interclass, 9.0);
    }

    #[test]
    fn combined_loss_examples() {
        let b = combined_loss(0.0, -3.7, 2.5).unwrap();
        assert_eq!(b.total, 2.5);
        let b = combined_loss(1.0, -3.7, 2.5).unwrap();
        assert_eq!(b.total, -3.7);
        assert_eq!(combined_loss(0.5, -2.0, 4.0).unwrap().total, 1.0);
        assert!(combined_loss(1.5, 0.0, 0.0).is_err());
        assert!(combined_loss(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn combined_loss_is_affine_in_c() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let carol: f64 = rng.gen_range(-5.0..5.0);
            let recon: f64 = rng.gen_range(0.0..8.0);
            let (c1, c2): (f64, f64) = (rng.gen(), rng.gen());
            let t1 = combined_loss(c1, carol, recon).unwrap().total;
            let t2 = combined_loss(c2, carol, recon).unwrap().total;
            if (c1 - c2).abs() > 1e-3 {
                assert_relative_eq!((t1 - t2) / (c1 - c2), carol - recon, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn separating_classes_lowers_the_loss() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let c = cfg(3, DistanceKind::Euclidean);
        let labels = [0, 0, 0, 1, 1, 1];
        for _ in 0..50 {
            let e: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let (base, _) = carol_loss(&e, &labels, &c).unwrap();
            // Push class 1 away along the direction between class means.
            let mean = |cls: u8| -> Vec<f64> {
                (0..4)
                    .map(|k| e.iter().zip(&labels).filter(|(_, l)| **l == cls).map(|(v, _)| v[k]).sum::<f64>() / 3.0)
                    .collect()
            };
            let (m0, m1) = (mean(0), mean(1));
            let dir: Vec<f64> = m1.iter().zip(&m0).map(|(a, b)| a - b).collect();
            let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            // Beyond the sample's diameter every cross-class distance grows.
            let dir: Vec<f64> = dir.iter().map(|d| 10.0 * d / len).collect();
            let moved: Vec<Vec<f64>> = e
                .iter()
                .zip(&labels)
                .map(|(v, l)| {
                    if *l == 1 {
                        v.iter().zip(&dir).map(|(x, d)| x + d).collect()
                    } else {
                        v.clone()
                    }
                })
                .collect();
            let (after, _) = carol_loss(&moved, &labels, &c).unwrap();
            assert!(after < base, "{after} !< {base}");
        }
    }
}
