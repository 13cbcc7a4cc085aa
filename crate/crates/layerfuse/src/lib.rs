//! Aggregating the layer dimension of frozen multi-layer feature stacks.
//!
//! A frozen upstream model emits one hidden-state tensor per layer; stacked
//! they form h with shape [L, T, D] (layers x frames x features). This crate
//! implements six interface designs that reduce that stack to per-frame
//! features [T, D_out] — the plain learnable weighted sum, grouped weighted
//! sums, concatenation + projection, a hierarchical convolution over the
//! layer axis, CLS-token attention pooling, and per-layer PCA + concatenation
//! — each with hand-written exact gradients and closed-form parameter
//! accounting. A deterministic trainer, synthetic dataset generators, binary
//! feature/model formats, and a small CLI round out the toolkit.
//!
//! Start with the runnable examples (`cargo run --release --example ...`) or
//! the `layerfuse` binary (`layerfuse --help`).

pub mod cli;
pub mod data;
pub mod error;
pub mod heads;
pub mod interface;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
pub use interface::{InterfaceParams, InterfaceSpec, LayerStack, Normalize, TimeFeatures};
pub use numerics::{Prng, Tensor};
pub use trainer::{train, TrainConfig, TrainReport};
