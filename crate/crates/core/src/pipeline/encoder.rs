//! Encoder training under the C-weighted objective.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::data::{add_noise_with, class_sample_with, Dataset, Label};
use crate::error::{Error, Result};
use crate::losses::{carol_loss, combined_loss, recon_loss, CarolConfig, LossBreakdown};
use crate::net::{init_encoder, EncoderState, Gradients};
use crate::rng;

/// One optimiser step's losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone)]
pub struct TrainedEncoder {
    pub state: EncoderState,
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLoss>,
}

fn non_finite(component: &str, step: usize) -> Error {
    Error::NonFiniteGradient {
        component: component.into(),
        detail: format!("at step {step}"),
    }
}

/// Reconstruction loss and gradient over one batch of noisy documents,
/// averaged over the batch.
fn recon_step(
    state: &EncoderState,
    ds: &Dataset,
    batch: &[usize],
    deletion_ratio: f64,
    noise_rng: &mut rng::Rng,
) -> Result<(f64, Gradients)> {
    let mut grads = state.zero_grads();
    let mut loss = 0.0;
    for &i in batch {
        let doc = &ds.docs()[i];
        let noisy = add_noise_with(doc, deletion_ratio, noise_rng)?;
        let (emb, enc_cache) = state.encode(&noisy.features)?;
        let (out, dec_cache) = state.decode(&emb)?;
        let (l, g_out) = recon_loss(&out, &doc.features)?;
        let g_emb = state.net.backward_into(&dec_cache, &g_out, &mut grads)?;
        state.net.accumulate_param_grads(&enc_cache, &g_emb, &mut grads)?;
        loss += l;
    }
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    Ok((loss * scale, grads))
}

/// Contrastive loss and gradient on a fresh balanced sample of clean
/// documents drawn from the whole training set.
fn carol_step(
    state: &EncoderState,
    ds: &Dataset,
    members: &[Vec<usize>; 2],
    cfg: &CarolConfig,
    sample_rng: &mut rng::Rng,
) -> Result<(f64, Gradients)> {
    let mut picks: Vec<(usize, Label)> = Vec::with_capacity(2 * cfg.n);
    for label in [0u8, 1] {
        let idx = class_sample_with(&members[usize::from(label)], label, cfg.n, sample_rng)?;
        picks.extend(idx.into_iter().map(|i| (i, label)));
    }
    let mut embeddings = Vec::with_capacity(picks.len());
    let mut caches = Vec::with_capacity(picks.len());
    for (i, _) in &picks {
        let (e, cache) = state.encode(&ds.docs()[*i].features)?;
        embeddings.push(e);
        caches.push(cache);
    }
    let labels: Vec<Label> = picks.iter().map(|(_, l)| *l).collect();
    let (loss, emb_grads) = carol_loss(&embeddings, &labels, cfg)?;
    let mut grads = state.zero_grads();
    for (cache, g) in caches.iter().zip(&emb_grads) {
        state.net.accumulate_param_grads(cache, g, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Trains the autoencoder for `cfg.epochs` epochs of
/// `ceil(|train| / recon_batch)` steps. Each step combines one noisy
/// reconstruction batch and one balanced contrastive sample, weighted
/// `1 - c` and `c`, into a single Adam update.
pub fn train_encoder(ds: &Dataset, cfg: &RunConfig) -> Result<TrainedEncoder> {
    cfg.validate()?;
    if ds.feat_dim() != cfg.feat_dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.feat_dim,
            actual: ds.feat_dim(),
        });
    }
    if let Some(i) = ds.docs().iter().position(|d| d.tokens.is_empty()) {
        return Err(Error::Data(format!("training document {i} has no tokens")));
    }
    let mut state = init_encoder(cfg.seed, cfg.feat_dim, cfg.emb_dim)?;
    let carol_cfg = CarolConfig {
        n: cfg.n,
        distance: cfg.distance,
        seed: cfg.seed,
    };
    let members = [ds.class_indices(0), ds.class_indices(1)];
    let mut shuffle_rng = rng::stream(cfg.seed, "epoch-order");
    let mut noise_rng = rng::stream(cfg.seed, "noise");
    let mut sample_rng = rng::stream(cfg.seed, "carol-sample");

    let mut steps = Vec::new();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut carol_sum, mut recon_sum, mut count) = (0.0, 0.0, 0usize);
        for batch in order.chunks(cfg.recon_batch) {
            let step = steps.len();
            let (recon, recon_grads) =
                recon_step(&state, ds, batch, cfg.deletion_ratio, &mut noise_rng)?;
            let (carol, carol_grads) = carol_step(&state, ds, &members, &carol_cfg, &mut sample_rng)?;
            let loss = combined_loss(cfg.c, carol, recon)?;
            if !loss.total.is_finite() || !carol.is_finite() || !recon.is_finite() {
                return Err(Error::Divergence {
                    step,
                    detail: format!(
                        "non-finite loss (carol={}, recon={}, total={}, c={})",
                        loss.carol, loss.recon, loss.total, loss.c
                    ),
                });
            }
            if !recon_grads.is_finite() {
                return Err(non_finite("reconstruction", step));
            }
            if !carol_grads.is_finite() {
                return Err(non_finite("contrastive", step));
            }
            let mut grads = state.zero_grads();
            grads.add_scaled(&carol_grads, cfg.c);
            grads.add_scaled(&recon_grads, 1.0 - cfg.c);
            state.opt_step(&grads, cfg.lr)?;
            steps.push(StepLog { step, epoch, loss });
            carol_sum += carol;
            recon_sum += recon;
            count += 1;
        }
        let n = count as f64;
        epochs.push(EpochLoss {
            epoch,
            loss: combined_loss(cfg.c, carol_sum / n, recon_sum / n)?,
        });
    }
    Ok(TrainedEncoder { state, steps, epochs })
}

/// Clean (noise-free) embeddings, aligned with the dataset's documents.
pub fn embed_dataset(state: &EncoderState, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    if ds.feat_dim() != state.feat_dim() {
        return Err(Error::DimensionMismatch {
            expected: state.feat_dim(),
            actual: ds.feat_dim(),
        });
    }
    ds.docs()
        .par_iter()
        .map(|d| Ok(state.encode(&d.features)?.0))
        .collect()
}
