//! Fair representation learning for binary classification with a binary
//! sensitive attribute.
//!
//! The crate has four layers:
//!
//! - [`engine`]: a small dense-network numeric core (forward/backward,
//!   weighted cross-entropy, gradient reversal, AdaDelta), all in `f64`
//!   and deterministic under a seed.
//! - [`metrics`]: fairness gap metrics (demographic parity, equalized
//!   odds, error gap, balanced error rate, base rates) on sample-level
//!   predictions and on exact finite joint distributions, plus machine
//!   checks of the bounds that relate them.
//! - [`models`]: the five adversarial training variants (`NoDebias`,
//!   `Fair`, `Laftr`, `CFairEo`, `CFair`) assembled from the engine and
//!   trained by gradient descent ascent through a reversal cut.
//! - [`data`]: Adult/COMPAS ingestion, synthetic dataset generation, and
//!   a canonical on-disk dataset cache.
//!
//! [`cli`] ties these together behind the `fairrep` binary; every
//! subcommand is also callable as a library function. The `examples/`
//! directory of this crate has one runnable program per capability.

pub mod cli;
pub mod data;
pub mod engine;
pub mod metrics;
pub mod models;

pub use data::{Dataset, Split, SynthSpec};
pub use engine::{AdaDeltaConfig, AdaDeltaState, DenseNet, EngineError};
pub use metrics::{
    BaseRates, ConfusionCells, EoGap, FairnessReport, FiniteJoint, MetricsError, PredictionSet,
    TheoremCheck,
};
pub use models::{FairModel, ModelError, TrainHistory, Variant, VariantConfig};
