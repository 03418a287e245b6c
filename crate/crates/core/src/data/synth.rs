//! Synthetic imbalanced corpora with a single overlap dial.
//!
//! The vocabulary is split into a shared block and one private block per
//! class. Class `k` draws each token from
//! `overlap * shared + (1 - overlap) * private_k`, so the overlap argument is
//! exactly the probability mass the two class distributions have in common:
//! 0 gives disjoint supports, 1 identical distributions. The shared block
//! follows a Zipf law; private blocks are uniform, so the class signal is
//! spread thinly over many rare tokens.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{write_corpus, Dataset, Document};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_minority: usize,
    pub imbalance_ratio: f64,
    pub overlap: f64,
    pub vocab_size: usize,
    pub doc_len: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_minority: 150,
            imbalance_ratio: 9.0,
            overlap: 0.6,
            vocab_size: 2000,
            doc_len: 24,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn n_majority(&self) -> usize {
        (self.n_minority as f64 * self.imbalance_ratio).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_minority == 0 || self.doc_len == 0 {
            return Err(Error::Config("n_minority and doc_len must be positive".into()));
        }
        if !(self.imbalance_ratio >= 1.0 && self.imbalance_ratio.is_finite()) {
            return Err(Error::Config(format!(
                "imbalance_ratio must be >= 1, got {}",
                self.imbalance_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap must lie in [0, 1], got {}", self.overlap)));
        }
        if self.vocab_size < 4 {
            return Err(Error::Config("vocab_size must be at least 4".into()));
        }
        Ok(())
    }
}

/// Vocabulary block sizes: (shared, private per class).
fn blocks(vocab_size: usize) -> (usize, usize) {
    let private = vocab_size / 4;
    (vocab_size - 2 * private, private)
}

fn zipf(n: usize) -> Vec<f64> {
    let w: Vec<f64> = (1..=n).map(|r| 1.0 / r as f64).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Token probabilities for class `label` over the full vocabulary, laid out
/// `[shared | private_0 | private_1]`.
pub(crate) fn class_distribution(spec: &SynthSpec, label: u8) -> Vec<f64> {
    let (shared, private) = blocks(spec.vocab_size);
    let mut p = vec![0.0; spec.vocab_size];
    for (i, w) in zipf(shared).into_iter().enumerate() {
        p[i] = spec.overlap * w;
    }
    let offset = shared + usize::from(label) * private;
    for slot in &mut p[offset..offset + private] {
        *slot = (1.0 - spec.overlap) / private as f64;
    }
    p
}

pub(crate) fn token_name(index: usize) -> String {
    format!("w{index}")
}

/// Label 1 is the minority class. Documents are shuffled so classes
/// interleave in ingestion order.
pub fn gen_synthetic(spec: &SynthSpec, feat_dim: usize) -> Result<Dataset> {
    spec.validate()?;
    let mut labels: Vec<u8> = std::iter::repeat_n(1, spec.n_minority)
        .chain(std::iter::repeat_n(0, spec.n_majority()))
        .collect();
    labels.shuffle(&mut rng::stream(spec.seed, "synth-labels"));

    let samplers = [0u8, 1].map(|c| {
        let p = class_distribution(spec, c);
        // Zero weights are fine as long as some mass remains.
        WeightedIndex::new(&p).expect("class distribution has positive mass")
    });
    let mut token_rng = rng::stream(spec.seed, "synth-tokens");
    let docs = labels
        .into_iter()
        .map(|label| {
            let text = (0..spec.doc_len)
                .map(|_| token_name(samplers[usize::from(label)].sample(&mut token_rng)))
                .collect::<Vec<_>>()
                .join(" ");
            Document::new(text, label, feat_dim)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(format!("synth-s{}", spec.seed), docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub generator: String,
    pub spec: SynthSpec,
    pub n_majority: usize,
    pub n_documents: usize,
    pub measured_imbalance_ratio: f64,
    pub minority_label: u8,
}

/// Writes `corpus.jsonl` and `corpus.meta.json` into `dir`.
pub fn write_synthetic(spec: &SynthSpec, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    // Features are irrelevant for the on-disk corpus.
    let ds = gen_synthetic(spec, 1)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let corpus = dir.join("corpus.jsonl");
    let meta = dir.join("corpus.meta.json");
    write_corpus(&corpus, ds.docs().iter().map(|d| (d.text.as_str(), d.label)))?;
    let metadata = SynthMetadata {
        generator: "unigram-overlap-v1".into(),
        spec: spec.clone(),
        n_majority: spec.n_majority(),
        n_documents: ds.len(),
        measured_imbalance_ratio: ds.imbalance_ratio(),
        minority_label: ds.minority_label(),
    };
    fs::write(&meta, serde_json::to_string_pretty(&metadata)? + "\n")
        .map_err(|e| Error::io(&meta, e))?;
    Ok((corpus, meta))
}
