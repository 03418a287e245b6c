//! Hand-rolled feed-forward networks: dense layers, cached forward passes,
//! exact backward passes and an Adam optimiser.

mod adam;
mod checkpoint;
mod encoder;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use encoder::{init_encoder, EncoderState};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Softmax,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Identity => {}
            Activation::Softmax => softmax_in_place(z),
        }
    }

    /// Maps dL/dy to dL/dz given the activation output y.
    fn backprop(self, y: &[f64], grad_y: &[f64]) -> Vec<f64> {
        match self {
            Activation::Tanh => y.iter().zip(grad_y).map(|(y, g)| g * (1.0 - y * y)).collect(),
            Activation::Relu => y
                .iter()
                .zip(grad_y)
                .map(|(y, g)| if *y > 0.0 { *g } else { 0.0 })
                .collect(),
            Activation::Identity => grad_y.to_vec(),
            Activation::Softmax => {
                let gy: f64 = y.iter().zip(grad_y).map(|(y, g)| y * g).sum();
                y.iter().zip(grad_y).map(|(y, g)| y * (g - gy)).collect()
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "softmax" => Ok(Activation::Softmax),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Format(format!("unknown activation '{other}'"))),
        }
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// Dense layer `y = act(W x + b)` with `W` stored row-major, `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(spec: LayerSpec) -> Self {
        Layer {
            spec,
            weights: vec![0.0; spec.in_dim * spec.out_dim],
            bias: vec![0.0; spec.out_dim],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero bias.
    pub fn glorot(spec: LayerSpec, rng: &mut Rng) -> Self {
        let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
        let weights = (0..spec.in_dim * spec.out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Layer {
            spec,
            weights,
            bias: vec![0.0; spec.out_dim],
        }
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        let n = self.spec.in_dim;
        let nz = sparse_support(x);
        self.weights
            .chunks_exact(n)
            .zip(&self.bias)
            .map(|(row, b)| {
                let mut acc = *b;
                match &nz {
                    Some(idx) => idx.iter().for_each(|&i| acc += row[i] * x[i]),
                    None => row.iter().zip(x).for_each(|(w, xi)| acc += w * xi),
                }
                acc
            })
            .collect()
    }
}

/// Indices of the non-zero entries when `x` is sparse enough for index
/// loops to beat dense ones. Skipping exact zeros leaves results unchanged.
fn sparse_support(x: &[f64]) -> Option<Vec<usize>> {
    let nz: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .take(x.len() / 4 + 1)
        .collect();
    (nz.len() <= x.len() / 4).then_some(nz)
}

/// Per-layer parameter gradients, shape-congruent with an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Layer::zeros(l.spec)).collect(),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += factor * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn congruent_with(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| g.spec == l.spec)
    }
}

/// Activations recorded by a forward pass over a contiguous layer range.
#[derive(Debug, Clone)]
pub struct Cache {
    generation: u64,
    start: usize,
    /// `inputs[i]` fed layer `start + i`; the last entry of `outputs` is the
    /// pass's result.
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn layers(&self) -> Range<usize> {
        self.start..self.start + self.inputs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    /// Bumped on every parameter update so stale caches are detectable.
    generation: u64,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            let s = l.spec;
            if s.in_dim == 0 || s.out_dim == 0 {
                return Err(Error::Config(format!("layer {i} has a zero dimension")));
            }
            if s.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(Error::Config(format!(
                    "softmax is only allowed on the final layer (found on layer {i})"
                )));
            }
            if l.weights.len() != s.in_dim * s.out_dim || l.bias.len() != s.out_dim {
                return Err(Error::Config(format!("layer {i} parameters do not match its spec")));
            }
            if i > 0 && layers[i - 1].spec.out_dim != s.in_dim {
                return Err(Error::Config(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    s.in_dim,
                    i - 1,
                    layers[i - 1].spec.out_dim
                )));
            }
        }
        Ok(Mlp {
            layers,
            generation: 0,
        })
    }

    pub fn glorot(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        Mlp::from_layers(specs.iter().map(|s| Layer::glorot(*s, rng)).collect())
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn touch(&mut self) {
        self.generation += 1;
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        self.forward_range(0..self.layers.len(), input)
    }

    /// Forward pass through `range` only (e.g. just the encoder half of an
    /// autoencoder).
    pub fn forward_range(&self, range: Range<usize>, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        if range.is_empty() || range.end > self.layers.len() {
            return Err(Error::Config(format!("invalid layer range {range:?}")));
        }
        let expected = self.layers[range.start].spec.in_dim;
        if input.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: input.len(),
            });
        }
        let mut cache = Cache {
            generation: self.generation,
            start: range.start,
            inputs: Vec::with_capacity(range.len()),
            outputs: Vec::with_capacity(range.len()),
        };
        let mut x = input.to_vec();
        for layer in &self.layers[range] {
            let mut y = layer.pre_activation(&x);
            layer.spec.activation.apply(&mut y);
            cache.inputs.push(x);
            x = y.clone();
            cache.outputs.push(y);
        }
        Ok((x, cache))
    }

    /// Output of a forward pass without keeping the cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    pub fn backward(&self, cache: &Cache, output_grad: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_into(cache, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Accumulates parameter gradients into `grads` and returns dL/d(input).
    pub fn backward_into(
        &self,
        cache: &Cache,
        output_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        self.backward_impl(cache, output_grad, grads, true)
    }

    /// As [`Mlp::backward_into`] but skips the input gradient, which is left
    /// as zeros.
    pub fn accumulate_param_grads(
        &self,
        cache: &Cache,
        output_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        self.backward_impl(cache, output_grad, grads, false).map(|_| ())
    }

    fn backward_impl(
        &self,
        cache: &Cache,
        output_grad: &[f64],
        grads: &mut Gradients,
        need_input_grad: bool,
    ) -> Result<Vec<f64>> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache(format!(
                "cache from generation {} used with generation {}",
                cache.generation, self.generation
            )));
        }
        let range = cache.layers();
        if range.is_empty() || range.end > self.layers.len() {
            return Err(Error::StaleCache(format!("layer range {range:?} out of bounds")));
        }
        if !grads.congruent_with(self) {
            return Err(Error::StaleCache("gradient buffer shape differs from network".into()));
        }
        let out_dim = self.layers[range.end - 1].spec.out_dim;
        if output_grad.len() != out_dim {
            return Err(Error::DimensionMismatch {
                expected: out_dim,
                actual: output_grad.len(),
            });
        }
        let mut grad = output_grad.to_vec();
        for (offset, li) in range.clone().enumerate().rev() {
            let layer = &self.layers[li];
            let x = &cache.inputs[offset];
            let y = &cache.outputs[offset];
            if x.len() != layer.spec.in_dim || y.len() != layer.spec.out_dim {
                return Err(Error::StaleCache(format!("layer {li} activations have wrong shape")));
            }
            let dz = layer.spec.activation.backprop(y, &grad);
            let n = layer.spec.in_dim;
            let g = &mut grads.layers[li];
            let nz = sparse_support(x);
            let mut dx = vec![0.0; n];
            for (o, dzo) in dz.iter().enumerate() {
                g.bias[o] += dzo;
                if *dzo == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * n..(o + 1) * n];
                let grow = &mut g.weights[o * n..(o + 1) * n];
                match &nz {
                    Some(idx) => idx.iter().for_each(|&i| grow[i] += dzo * x[i]),
                    None => grow.iter_mut().zip(x).for_each(|(gw, xi)| *gw += dzo * xi),
                }
                if need_input_grad || offset > 0 {
                    dx.iter_mut().zip(row).for_each(|(d, w)| *d += dzo * w);
                }
            }
            grad = dx;
        }
        Ok(grad)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}
