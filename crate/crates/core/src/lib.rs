//! Class-aware contrastive representation learning for imbalanced binary
//! text classification.
//!
//! The crate couples a small denoising autoencoder over hashed bag-of-words
//! features with a sampled class-separation loss, and ships the evaluation
//! machinery (minority-class F1, separability index, k-disagreeing
//! neighbours, PCA projection) plus an experiment pipeline and CLI.

pub mod cli;
pub mod data;
pub mod distances;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod rng;

pub use distances::{distance, distance_grad, DistanceKind, Vector};
pub use error::{Error, Result};
