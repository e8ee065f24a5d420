//! Dual co-attention network (Dual-CAN) for fake-news detection.
//!
//! News sentences are encoded hierarchically (word-level BiGRU + attention,
//! then a sentence-level BiGRU). Entity descriptions and user comments are
//! encoded with the word-level stage only. Two co-attention blocks relate the
//! news to each side source, and a two-layer head classifies the pooled
//! features. Everything runs on the small reverse-mode engine in [`graph`].

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod hparams;
pub mod layers;
pub mod metrics;
pub mod model;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{Axis, Graph, Var};
pub use hparams::{HyperParams, Profile};
pub use tensor::Tensor;
