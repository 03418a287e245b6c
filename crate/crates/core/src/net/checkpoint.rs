//! Encoder checkpoints.
//!
//! JSON document:
//!
//! ```text
//! {
//!   "format": "carol-encoder",
//!   "version": 1,
//!   "step_count": <u64>,
//!   "layers": [
//!     { "in_dim": .., "out_dim": .., "activation": "tanh",
//!       "weights": [row-major, out_dim x in_dim], "bias": [out_dim] },
//!     ...
//!   ]
//! }
//! ```
//!
//! Optimiser moments are not persisted; a loaded checkpoint is meant for
//! embedding, not for resuming training.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, EncoderState, Layer, LayerSpec, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "carol-encoder";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerDump {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Dump {
    format: String,
    version: u32,
    step_count: u64,
    layers: Vec<LayerDump>,
}

pub fn write_checkpoint(state: &EncoderState, path: &Path) -> Result<()> {
    let dump = Dump {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        step_count: state.step_count(),
        layers: state
            .net
            .layers
            .iter()
            .map(|l| LayerDump {
                in_dim: l.spec.in_dim,
                out_dim: l.spec.out_dim,
                activation: l.spec.activation,
                weights: l.weights.clone(),
                bias: l.bias.clone(),
            })
            .collect(),
    };
    let text = serde_json::to_string(&dump)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<EncoderState> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dump: Dump = serde_json::from_str(&text)?;
    if dump.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!("{}: not an encoder checkpoint", path.display())));
    }
    if dump.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            dump.version
        )));
    }
    let layers = dump
        .layers
        .into_iter()
        .map(|l| Layer {
            spec: LayerSpec::new(l.in_dim, l.out_dim, l.activation),
            weights: l.weights,
            bias: l.bias,
        })
        .collect();
    EncoderState::from_net(Mlp::from_layers(layers)?)
}
