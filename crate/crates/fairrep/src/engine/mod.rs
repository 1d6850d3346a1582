//! Dense-network numeric core.
//!
//! Everything here is `f64`, single-threaded, and deterministic given a
//! seed: the same inputs produce bitwise-identical outputs. Networks are
//! fixed stacks of affine layers with rectifier activations between them;
//! the last layer emits raw logits unless the net is built as a rectified
//! encoder. Backward passes run off a [`Tape`] recorded during the
//! forward pass; a tape is consumed by value, so it cannot be replayed.

mod adadelta;
mod loss;
mod net;

pub use adadelta::{adadelta_scalar, AdaDeltaConfig, AdaDeltaState};
pub use loss::{sigmoid, weighted_bce, BceOutput};
pub use net::{
    reversed_backward, reversed_forward, DenseNet, Layer, LayerGrads, NetGrads, ReversedGrads,
    ReversedTape, Tape,
};

use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("bad architecture: {0}")]
    BadArchitecture(String),
    #[error("bad hyperparameter: {0}")]
    BadHyperparameter(String),
}
