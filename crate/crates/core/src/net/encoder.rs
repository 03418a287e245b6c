use std::ops::Range;

use super::{Activation, Adam, Cache, Gradients, LayerSpec, Mlp};
use crate::error::{Error, Result};
use crate::rng;

/// Denoising autoencoder: `[feat -> emb, tanh]` encoder followed by a
/// `[emb -> feat, softmax]` decoder, plus its optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub net: Mlp,
    pub opt: Adam,
}

pub const ENCODER_LAYERS: Range<usize> = 0..1;
pub const DECODER_LAYERS: Range<usize> = 1..2;

pub fn init_encoder(seed: u64, feat_dim: usize, emb_dim: usize) -> Result<EncoderState> {
    if feat_dim == 0 || emb_dim == 0 {
        return Err(Error::Config("feature and embedding dimensions must be positive".into()));
    }
    let specs = [
        LayerSpec::new(feat_dim, emb_dim, Activation::Tanh),
        LayerSpec::new(emb_dim, feat_dim, Activation::Softmax),
    ];
    let net = Mlp::glorot(&specs, &mut rng::stream(seed, "encoder-init"))?;
    EncoderState::from_net(net)
}

impl EncoderState {
    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.layers.len() != 2 || net.layers[0].spec.out_dim != net.layers[1].spec.in_dim {
            return Err(Error::Config("an autoencoder needs exactly an encoder and a decoder layer".into()));
        }
        let opt = Adam::new(&net);
        Ok(EncoderState { net, opt })
    }

    pub fn feat_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn emb_dim(&self) -> usize {
        self.net.layers[0].spec.out_dim
    }

    pub fn step_count(&self) -> u64 {
        self.opt.step_count()
    }

    pub fn encode(&self, features: &[f64]) -> Result<(Vec<f64>, Cache)> {
        self.net.forward_range(ENCODER_LAYERS, features)
    }

    pub fn decode(&self, embedding: &[f64]) -> Result<(Vec<f64>, Cache)> {
        self.net.forward_range(DECODER_LAYERS, embedding)
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients::zeros_like(&self.net)
    }

    pub fn opt_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        self.opt.step(&mut self.net, grads, lr)
    }
}
