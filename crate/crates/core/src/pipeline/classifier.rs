//! Downstream three-layer perceptron (input, hidden, 2-way softmax) with the
//! hidden width picked by stratified k-fold cross-validation on
//! minority-class F1.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::metrics::{prf, ConfusionCounts};
use crate::net::{Activation, Adam, Gradients, LayerSpec, Mlp};
use crate::rng;

pub const HIDDEN_WIDTHS: [usize; 3] = [16, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub folds: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            folds: 5,
            epochs: 60,
            lr: 3e-3,
            batch: 32,
        }
    }
}

/// Per-feature standardisation fitted on training embeddings.
#[derive(Debug, Clone, PartialEq)]
struct Scaler {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Scaler {
    fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for row in x {
            var.iter_mut()
                .zip(row.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-12 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        Scaler { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) * s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub net: Mlp,
    pub hidden: usize,
    scaler: Scaler,
}

impl Classifier {
    /// Argmax of the softmax output.
    pub fn predict(&self, embedding: &[f64]) -> Result<Label> {
        let p = self.net.predict(&self.scaler.apply(embedding))?;
        Ok(if p[1] > p[0] { 1 } else { 0 })
    }

    pub fn predict_all(&self, embeddings: &[Vec<f64>]) -> Result<Vec<Label>> {
        embeddings.iter().map(|e| self.predict(e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub hidden: usize,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub folds: usize,
    pub positive_label: Label,
    pub rows: Vec<CvRow>,
    pub chosen_hidden: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Fits one network on `(x, y)` with minibatch Adam on cross-entropy.
fn fit(x: &[Vec<f64>], y: &[Label], hidden: usize, cfg: &ClassifierConfig, seed: u64) -> Result<Classifier> {
    let scaler = Scaler::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
    let specs = [
        LayerSpec::new(xs[0].len(), hidden, Activation::Relu),
        LayerSpec::new(hidden, 2, Activation::Softmax),
    ];
    let mut net = Mlp::glorot(&specs, &mut rng::stream(seed, "clf-init"))?;
    let mut opt = Adam::new(&net);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut shuffle = rng::stream(seed, "clf-order");
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(cfg.batch) {
            let mut grads = Gradients::zeros_like(&net);
            for &i in batch {
                let (p, cache) = net.forward(&xs[i])?;
                let t = usize::from(y[i]);
                let mut g = [0.0; 2];
                g[t] = -1.0 / p[t].max(1e-12);
                net.backward_into(&cache, &g, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.step(&mut net, &grads, cfg.lr)?;
        }
    }
    Ok(Classifier { net, hidden, scaler })
}

fn minority_label(y: &[Label]) -> Label {
    let ones = y.iter().filter(|l| **l == 1).count();
    if ones <= y.len() - ones {
        1
    } else {
        0
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
fn stratified_folds(y: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, "cv-folds");
    let mut assign = vec![0; y.len()];
    for label in [0u8, 1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        members.shuffle(&mut rng);
        for (pos, i) in members.into_iter().enumerate() {
            assign[i] = pos % folds;
        }
    }
    assign
}

pub fn train_classifier(
    x: &[Vec<f64>],
    y: &[Label],
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<(Classifier, CvRecord)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let ones = y.iter().filter(|l| **l == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::Data("classifier training needs both labels".into()));
    }
    let positive = minority_label(y);
    let minority = ones.min(y.len() - ones);
    let mut warning = None;
    let folds = cfg.folds.min(minority);
    if folds < cfg.folds {
        warning = Some(format!(
            "minority class has {minority} training examples; cross-validation reduced from {} to {folds} folds",
            cfg.folds
        ));
    }

    let mut rows = Vec::new();
    let chosen_hidden = if folds >= 2 {
        let assign = stratified_folds(y, folds, seed);
        let jobs: Vec<(usize, usize)> = HIDDEN_WIDTHS
            .iter()
            .flat_map(|&h| (0..folds).map(move |f| (h, f)))
            .collect();
        let scores: Vec<f64> = jobs
            .par_iter()
            .map(|&(h, f)| {
                let (mut tx, mut ty, mut vx, mut vy) = (vec![], vec![], vec![], vec![]);
                for i in 0..x.len() {
                    if assign[i] == f {
                        vx.push(x[i].clone());
                        vy.push(y[i]);
                    } else {
                        tx.push(x[i].clone());
                        ty.push(y[i]);
                    }
                }
                let fold_seed = rng::derive_seed(seed, &format!("cv-{h}-{f}"));
                let clf = fit(&tx, &ty, h, cfg, fold_seed)?;
                let pred = clf.predict_all(&vx)?;
                Ok(prf(&ConfusionCounts::from_predictions(&pred, &vy, positive)?).f1)
            })
            .collect::<Result<_>>()?;
        for (wi, &h) in HIDDEN_WIDTHS.iter().enumerate() {
            let fold_f1 = scores[wi * folds..(wi + 1) * folds].to_vec();
            let mean_f1 = fold_f1.iter().sum::<f64>() / folds as f64;
            rows.push(CvRow { hidden: h, fold_f1, mean_f1 });
        }
        // First maximum wins, i.e. the narrowest of tied widths.
        rows.iter()
            .fold(None::<&CvRow>, |best, r| match best {
                Some(b) if b.mean_f1 >= r.mean_f1 => Some(b),
                _ => Some(r),
            })
            .map(|r| r.hidden)
            .unwrap_or(HIDDEN_WIDTHS[1])
    } else {
        warning = Some(format!(
            "minority class has {minority} training example(s); cross-validation skipped, hidden width {} used",
            HIDDEN_WIDTHS[1]
        ));
        HIDDEN_WIDTHS[1]
    };

    let clf = fit(x, y, chosen_hidden, cfg, rng::derive_seed(seed, "clf-final"))?;
    Ok((
        clf,
        CvRecord {
            folds,
            positive_label: positive,
            rows,
            chosen_hidden,
            warning,
        },
    ))
}
