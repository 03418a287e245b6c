//! Evaluation metrics: minority-class precision/recall/F1, neighbourhood
//! class-overlap measures, and a PCA projection for plotting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::distances::{distance, DistanceKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(predicted: &[Label], truth: &[Label], positive: Label) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let mut c = ConfusionCounts::default();
        for (p, t) in predicted.iter().zip(truth) {
            match (*p == positive, *t == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and F1 of the positive class; every 0/0 is 0. F1 is
/// computed from counts as `2tp / (2tp + fp + fn)`.
pub fn prf(counts: &ConfusionCounts) -> Prf {
    let (tp, fp, fn_) = (counts.tp as f64, counts.fp as f64, counts.fn_ as f64);
    Prf {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
    }
}

fn check_points<E: AsRef<[f64]>>(embeddings: &[E], labels: &[Label]) -> Result<()> {
    if embeddings.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: embeddings.len(),
            actual: labels.len(),
        });
    }
    if embeddings.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 points, got {}",
            embeddings.len()
        )));
    }
    Ok(())
}

/// Indices of the `k` nearest neighbours of every point, self excluded,
/// distance ties broken by lower index.
pub fn nearest_neighbors<E: AsRef<[f64]> + Sync>(
    embeddings: &[E],
    k: usize,
    kind: DistanceKind,
) -> Result<Vec<Vec<usize>>> {
    let n = embeddings.len();
    if k == 0 || k >= n {
        return Err(Error::Config(format!("k must lie in [1, {}), got {k}", n)));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let q = embeddings[i].as_ref();
            let mut d = Vec::with_capacity(n - 1);
            for (j, e) in embeddings.iter().enumerate() {
                if j != i {
                    d.push((distance(kind, q, e.as_ref())?, j));
                }
            }
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            Ok(d[..k].iter().map(|(_, j)| *j).collect())
        })
        .collect()
}

/// Fraction of points whose nearest neighbour shares their label.
pub fn separability_index<E: AsRef<[f64]> + Sync>(
    embeddings: &[E],
    labels: &[Label],
    kind: DistanceKind,
) -> Result<f64> {
    check_points(embeddings, labels)?;
    let nn = nearest_neighbors(embeddings, 1, kind)?;
    let same = nn
        .iter()
        .enumerate()
        .filter(|(i, nb)| labels[nb[0]] == labels[*i])
        .count();
    Ok(same as f64 / embeddings.len() as f64)
}

/// k-disagreeing neighbours: mean fraction of each point's `k` nearest
/// neighbours with a different label.
pub fn kdn<E: AsRef<[f64]> + Sync>(
    embeddings: &[E],
    labels: &[Label],
    k: usize,
    kind: DistanceKind,
) -> Result<f64> {
    check_points(embeddings, labels)?;
    let nn = nearest_neighbors(embeddings, k, kind)?;
    let total: f64 = nn
        .iter()
        .enumerate()
        .map(|(i, nb)| nb.iter().filter(|&&j| labels[j] != labels[i]).count() as f64 / k as f64)
        .sum();
    Ok(total / embeddings.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub si: f64,
    pub kdn: f64,
    pub k: usize,
    pub distance: DistanceKind,
}

pub fn overlap_report<E: AsRef<[f64]> + Sync>(
    embeddings: &[E],
    labels: &[Label],
    k: usize,
    kind: DistanceKind,
) -> Result<OverlapReport> {
    Ok(OverlapReport {
        si: separability_index(embeddings, labels, kind)?,
        kdn: kdn(embeddings, labels, k, kind)?,
        k,
        distance: kind,
    })
}

pub const PCA_TOLERANCE: f64 = 1e-9;
pub const PCA_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// One row per input point, `requested` coordinates; coordinates beyond
    /// the recovered components are zero.
    pub points: Vec<Vec<f64>>,
    /// Unit principal directions, variance-ordered.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub requested: usize,
}

impl Projection {
    pub fn is_degenerate(&self) -> bool {
        self.components.len() < self.requested
    }
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    }
}

/// Mean-centred projection onto the top `dims` principal directions, found
/// by power iteration with deflation. Each component is signed so that its
/// largest-magnitude loading is positive.
pub fn pca_project<E: AsRef<[f64]>>(embeddings: &[E], dims: usize) -> Result<Projection> {
    let n = embeddings.len();
    if dims == 0 {
        return Err(Error::Config("projection needs at least one dimension".into()));
    }
    if n < dims || n < 2 {
        return Err(Error::Data(format!("need at least {} points, got {n}", dims.max(2))));
    }
    let d = embeddings[0].as_ref().len();
    if let Some(e) = embeddings.iter().find(|e| e.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: e.as_ref().len(),
        });
    }
    let mut mean = vec![0.0; d];
    for e in embeddings {
        mean.iter_mut().zip(e.as_ref()).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| e.as_ref().iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for row in &centred {
        for (cov_row, ra) in cov.iter_mut().zip(row) {
            cov_row.iter_mut().zip(row).for_each(|(c, rb)| *c += ra * rb);
        }
    }
    let dof = (n - 1) as f64;
    cov.iter_mut().flatten().for_each(|v| *v /= dof);
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    let floor = 1e-12 * trace.max(f64::MIN_POSITIVE);

    let mut components: Vec<Vec<f64>> = Vec::new();
    let mut eigenvalues = Vec::new();
    for c in 0..dims.min(d) {
        // Irregular deterministic start, unlikely to be orthogonal to the target.
        let mut v: Vec<f64> = (0..d)
            .map(|i| 1.0 + ((i * 7919 + c * 104_729) % 97) as f64 / 97.0)
            .collect();
        orthogonalize(&mut v, &components);
        if normalize(&mut v) == 0.0 {
            break;
        }
        for _ in 0..PCA_MAX_ITER {
            let mut next = mat_vec(&cov, &v);
            orthogonalize(&mut next, &components);
            if normalize(&mut next) == 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                break;
            }
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            v = next;
            if delta < PCA_TOLERANCE {
                break;
            }
        }
        let lambda = dot(&v, &mat_vec(&cov, &v));
        if lambda.partial_cmp(&floor) != Some(std::cmp::Ordering::Greater) {
            break;
        }
        let lead = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1.abs() { (i, *x) } else { best })
            .1;
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        eigenvalues.push(lambda);
    }
    let points = centred
        .iter()
        .map(|row| {
            let mut p: Vec<f64> = components.iter().map(|c| dot(row, c)).collect();
            p.resize(dims, 0.0);
            p
        })
        .collect();
    Ok(Projection {
        points,
        components,
        eigenvalues,
        requested: dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn prf_examples() {
        let p = prf(&ConfusionCounts { tp: 9, fp: 3, fn_: 1, tn: 87 });
        assert_eq!(p.precision, 0.75);
        assert_eq!(p.recall, 0.9);
        assert_relative_eq!(p.f1, 2.0 * 0.75 * 0.9 / 1.65, epsilon = 1e-15);
        assert_relative_eq!(p.f1, 0.818, epsilon = 1e-3);
        assert_eq!(prf(&ConfusionCounts::default()), Prf::default());
        let perfect = prf(&ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 20 });
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn confusion_from_predictions() {
        let c = ConfusionCounts::from_predictions(&[1, 1, 0, 0, 1], &[1, 0, 1, 0, 1], 1).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 1 });
        assert_eq!(c.total(), 5);
        assert!(ConfusionCounts::from_predictions(&[1], &[1, 0], 1).is_err());
    }

    #[test]
    fn prf_is_order_invariant() {
        let mut r = rng(1);
        let pred: Vec<Label> = (0..200).map(|_| r.gen_range(0..2)).collect();
        let truth: Vec<Label> = (0..200).map(|_| r.gen_range(0..2)).collect();
        let a = prf(&ConfusionCounts::from_predictions(&pred, &truth, 1).unwrap());
        let mut idx: Vec<usize> = (0..200).collect();
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut r);
        let p2: Vec<Label> = idx.iter().map(|&i| pred[i]).collect();
        let t2: Vec<Label> = idx.iter().map(|&i| truth[i]).collect();
        assert_eq!(a, prf(&ConfusionCounts::from_predictions(&p2, &t2, 1).unwrap()));
    }

    #[test]
    fn separated_clusters() {
        let mut r = rng(2);
        let mut e = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2u8 {
            for _ in 0..10 {
                e.push(vec![c as f64 * 100.0 + r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]);
                labels.push(c);
            }
        }
        assert_eq!(separability_index(&e, &labels, DistanceKind::Euclidean).unwrap(), 1.0);
        assert_eq!(kdn(&e, &labels, 5, DistanceKind::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn interleaved_line() {
        let e: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<Label> = (0..20).map(|i| (i % 2) as Label).collect();
        assert_eq!(separability_index(&e, &labels, DistanceKind::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn neighbor_ties_take_lowest_index() {
        let e = vec![vec![0.0], vec![1.0], vec![-1.0]];
        assert_eq!(nearest_neighbors(&e, 1, DistanceKind::Euclidean).unwrap()[0], vec![1]);
        let labels = [0, 1, 0];
        // Point 0's tie resolves to index 1 (different label).
        let si = separability_index(&e, &labels, DistanceKind::Euclidean).unwrap();
        assert_relative_eq!(si, 1.0 / 3.0);
    }

    #[test]
    fn overlap_errors() {
        let e = vec![vec![0.0], vec![1.0]];
        assert!(separability_index(&e[..1], &[0], DistanceKind::Euclidean).is_err());
        assert!(kdn(&e, &[0, 1], 2, DistanceKind::Euclidean).is_err());
        assert!(kdn(&e, &[0, 1], 0, DistanceKind::Euclidean).is_err());
    }

    #[test]
    fn si_is_one_minus_kdn1() {
        let mut r = rng(3);
        for _ in 0..20 {
            let n = r.gen_range(2..40);
            let e: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(0..4) as f64, r.gen_range(0..4) as f64]).collect();
            let labels: Vec<Label> = (0..n).map(|_| r.gen_range(0..2)).collect();
            let si = separability_index(&e, &labels, DistanceKind::Euclidean).unwrap();
            let k1 = kdn(&e, &labels, 1, DistanceKind::Euclidean).unwrap();
            assert_relative_eq!(si, 1.0 - k1, epsilon = 1e-12);
        }
    }

    #[test]
    fn overlap_invariant_under_rigid_motion() {
        let mut r = rng(4);
        let e: Vec<Vec<f64>> = (0..40).map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
        let labels: Vec<Label> = (0..40).map(|_| r.gen_range(0..2)).collect();
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let moved: Vec<Vec<f64>> = e.iter().map(|p| vec![c * p[0] - s * p[1] + 5.0, s * p[0] + c * p[1] - 2.0]).collect();
        let a = overlap_report(&e, &labels, 5, DistanceKind::Euclidean).unwrap();
        let b = overlap_report(&moved, &labels, 5, DistanceKind::Euclidean).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pca_recovers_planar_data() {
        let mut r = rng(5);
        // Orthonormal basis of a 2D plane inside R^10.
        let mut u: Vec<f64> = (0..10).map(|_| r.gen_range(-1.0..1.0)).collect();
        normalize(&mut u);
        let mut w: Vec<f64> = (0..10).map(|_| r.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut w, std::slice::from_ref(&u));
        normalize(&mut w);
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b) = (r.gen_range(-3.0..3.0), r.gen_range(-1.0..1.0));
                (0..10).map(|i| 2.0 + a * u[i] + b * w[i]).collect()
            })
            .collect();
        let proj = pca_project(&pts, 2).unwrap();
        assert_eq!(proj.components.len(), 2);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let orig = distance(DistanceKind::Euclidean, &pts[i], &pts[j]).unwrap();
                let p = distance(DistanceKind::Euclidean, &proj.points[i], &proj.points[j]).unwrap();
                assert!((orig - p).abs() < 1e-6);
            }
        }
        assert!(dot(&proj.components[0], &proj.components[1]).abs() < 1e-9);
        assert!(proj.eigenvalues[0] >= proj.eigenvalues[1]);
    }

    #[test]
    fn pca_reports_degenerate_data() {
        let pts = vec![vec![1.0, 2.0, 3.0]; 5];
        let proj = pca_project(&pts, 2).unwrap();
        assert!(proj.is_degenerate());
        assert!(proj.components.is_empty());
        assert!(proj.points.iter().all(|p| p == &vec![0.0, 0.0]));
        assert!(pca_project(&pts[..1], 2).is_err());
    }

    #[test]
    fn pca_signs_are_fixed() {
        let mut r = rng(6);
        let pts: Vec<Vec<f64>> = (0..25).map(|_| (0..5).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let proj = pca_project(&pts, 2).unwrap();
        for c in &proj.components {
            let lead = c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(lead > 0.0);
        }
    }
}
