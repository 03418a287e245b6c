#![allow(dead_code)]

use carol::data::{gen_synthetic, Dataset, SynthSpec};
use carol::pipeline::RunConfig;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SMALL_FEAT_DIM: usize = 256;

pub fn small_spec(overlap: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        n_minority: 30,
        imbalance_ratio: 3.0,
        overlap,
        vocab_size: 400,
        doc_len: 12,
        seed,
    }
}

pub fn small_dataset(overlap: f64, seed: u64) -> Dataset {
    gen_synthetic(&small_spec(overlap, seed), SMALL_FEAT_DIM).unwrap()
}

pub fn small_config(c: f64, seed: u64) -> RunConfig {
    RunConfig {
        c,
        seed,
        epochs: 2,
        feat_dim: SMALL_FEAT_DIM,
        emb_dim: 16,
        cv_folds: 3,
        clf_epochs: 15,
        ..RunConfig::default()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn random_labels(rng: &mut ChaCha8Rng, count: usize) -> Vec<u8> {
    let mut labels: Vec<u8> = (0..count).map(|i| (i % 2) as u8).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), rng);
    labels
}

pub fn brute_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Plain O(n^2) kNN: self excluded, ties broken by lower index.
pub fn brute_knn(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (brute_distance(&points[i], &points[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}
