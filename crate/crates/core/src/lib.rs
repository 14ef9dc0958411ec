//! Synthetic-outlier data augmentation for imbalanced node classification.
//!
//! The crate trains a variational graph autoencoder (a GraphSAGE encoder plus
//! a conditional graph generator) together with a variance-exploding latent
//! diffusion model, then samples outlier-conditioned latents and decodes them
//! into synthetic outlier nodes that are batched onto the real graph before
//! training a downstream detector.
//!
//! Module map:
//! - [`tensor`], [`optim`], [`rng`]: dense autodiff substrate, Adam, seeded RNG
//! - [`graph`]: graph data model, partitioning, negative sampling, batching
//! - [`io`]: graph directory format (CSV + JSON)
//! - [`encoder`] / [`generator`]: VAE halves
//! - [`diffusion`]: EDM-style forward kernel, score matching, sampler
//! - [`pipeline`]: training loops, losses, checkpoints, augmentation
//! - [`eval`]: detector, imbalance-robust metrics, benchmark runner

pub mod diffusion;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod generator;
pub mod graph;
pub mod io;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use error::{GraphError, ModelError, TensorError};
pub use rng::Rng;
pub use tensor::Tensor;
