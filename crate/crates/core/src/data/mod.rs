//! Documents, datasets and the sampling/noising operations used in training.

mod corpus;
mod synth;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use corpus::{read_corpus, read_corpus_str, write_corpus, CorpusRecord};
pub use synth::{gen_synthetic, write_synthetic, SynthSpec, SynthMetadata};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub type Label = u8;

/// Lowercases, splits on Unicode whitespace and strips non-alphanumeric
/// characters from both ends of every token. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// 64-bit FNV-1a over the UTF-8 bytes. Pinned: bucket assignments must not
/// change between releases.
pub fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bag-of-words counts hashed into `feat_dim` buckets.
pub fn hash_features<S: AsRef<str>>(tokens: &[S], feat_dim: usize) -> Vec<f64> {
    assert!(feat_dim > 0, "feat_dim must be positive");
    let mut v = vec![0.0; feat_dim];
    for t in tokens {
        v[(fnv1a64(t.as_ref()) % feat_dim as u64) as usize] += 1.0;
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub text: String,
    pub label: Label,
    pub tokens: Vec<String>,
    pub features: Vec<f64>,
}

impl Document {
    pub fn new(text: impl Into<String>, label: Label, feat_dim: usize) -> Result<Self> {
        if label > 1 {
            return Err(Error::Data(format!("label must be 0 or 1, got {label}")));
        }
        if feat_dim == 0 {
            return Err(Error::Config("feat_dim must be positive".into()));
        }
        let text = text.into();
        let tokens = tokenize(&text);
        let features = hash_features(&tokens, feat_dim);
        Ok(Document {
            text,
            label,
            tokens,
            features,
        })
    }

    pub fn feat_dim(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub deletion_ratio: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.deletion_ratio) {
            return Err(Error::Config(format!(
                "deletion_ratio must lie in [0, 1), got {}",
                self.deletion_ratio
            )));
        }
        Ok(())
    }
}

/// Token-deletion noise seeded by `cfg.seed`.
pub fn add_noise(doc: &Document, cfg: &NoiseConfig) -> Result<Document> {
    cfg.validate()?;
    add_noise_with(doc, cfg.deletion_ratio, &mut rng::stream(cfg.seed, "noise"))
}

/// Deletes each token independently with probability `deletion_ratio`; if
/// nothing survives, one uniformly chosen token is kept.
pub fn add_noise_with(doc: &Document, deletion_ratio: f64, rng: &mut Rng) -> Result<Document> {
    if doc.tokens.is_empty() {
        return Err(Error::Data("cannot add noise to an empty document".into()));
    }
    let mut kept: Vec<String> = doc
        .tokens
        .iter()
        .filter(|_| !rng.gen_bool(deletion_ratio))
        .cloned()
        .collect();
    if kept.is_empty() {
        kept.push(doc.tokens[rng.gen_range(0..doc.tokens.len())].clone());
    }
    let features = hash_features(&kept, doc.feat_dim());
    Ok(Document {
        text: kept.join(" "),
        label: doc.label,
        tokens: kept,
        features,
    })
}

/// Ordered documents of both classes. The class with fewer documents is the
/// minority (label 1 on an exact tie).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    docs: Vec<Document>,
    minority_label: Label,
    imbalance_ratio: f64,
}

impl Dataset {
    pub fn new(name: impl Into<String>, docs: Vec<Document>) -> Result<Self> {
        let name = name.into();
        let ones = docs.iter().filter(|d| d.label == 1).count();
        let zeros = docs.len() - ones;
        if ones == 0 || zeros == 0 {
            return Err(Error::Data(format!(
                "dataset '{name}' must contain both labels ({zeros} zeros, {ones} ones)"
            )));
        }
        if let Some(d) = docs.iter().find(|d| d.feat_dim() != docs[0].feat_dim()) {
            return Err(Error::DimensionMismatch {
                expected: docs[0].feat_dim(),
                actual: d.feat_dim(),
            });
        }
        let (minority_label, minority, majority) = if ones <= zeros {
            (1, ones, zeros)
        } else {
            (0, zeros, ones)
        };
        Ok(Dataset {
            name,
            docs,
            minority_label,
            imbalance_ratio: majority as f64 / minority as f64,
        })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn minority_label(&self) -> Label {
        self.minority_label
    }

    pub fn imbalance_ratio(&self) -> f64 {
        self.imbalance_ratio
    }

    pub fn feat_dim(&self) -> usize {
        self.docs[0].feat_dim()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.docs.iter().map(|d| d.label).collect()
    }

    pub fn class_indices(&self, label: Label) -> Vec<usize> {
        self.docs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.label == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.docs.iter().filter(|d| d.label == label).count()
    }

    fn subset(&self, name: String, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(name, indices.iter().map(|&i| self.docs[i].clone()).collect())
    }
}

/// `n` dataset indices of class `c`, drawn with `seed`.
pub fn class_sample(ds: &Dataset, c: Label, n: usize, seed: u64) -> Result<Vec<usize>> {
    class_sample_with(&ds.class_indices(c), c, n, &mut rng::stream(seed, "class-sample"))
}

/// Uniform sample of `n` members of `class_members`: without replacement when
/// the class is large enough, with replacement otherwise.
pub fn class_sample_with(
    class_members: &[usize],
    c: Label,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if class_members.is_empty() {
        return Err(Error::Data(format!("class {c} is empty")));
    }
    if n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    if class_members.len() >= n {
        Ok(index::sample(rng, class_members.len(), n)
            .into_iter()
            .map(|i| class_members[i])
            .collect())
    } else {
        Ok((0..n)
            .map(|_| class_members[rng.gen_range(0..class_members.len())])
            .collect())
    }
}

/// Per-class proportional split; each split keeps ingestion order.
pub fn stratified_split(ds: &Dataset, test_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::Config(format!("test_frac must lie in (0, 1), got {test_frac}")));
    }
    let mut rng = rng::stream(seed, "split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [0, 1] {
        let mut members = ds.class_indices(label);
        let n_test = (members.len() as f64 * test_frac).round() as usize;
        if n_test == 0 || n_test == members.len() {
            return Err(Error::Data(format!(
                "class {label} has {} documents, too few to appear in both splits at test_frac {test_frac}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((
        ds.subset(format!("{}-train", ds.name), &train)?,
        ds.subset(format!("{}-test", ds.name), &test)?,
    ))
}
