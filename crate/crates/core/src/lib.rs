//! Pure-algorithm core of a 1D-CNN network-flow attack classifier.
//!
//! Everything in this crate is allocation-only (`alloc`), free of IO and
//! deterministic for a fixed seed: tensors, the Conv1D/MaxPool/Dense layer
//! stack with hand-written backward passes, cross-entropy + Adam, the
//! preprocessing pipeline, the label taxonomy, metrics and the training loop.
//! File formats and the command-line front end live in the `flowsentinel`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod layers;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod synthetic;
pub mod taxonomy;
pub mod tensor;
pub mod trainer;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use model::{ArchitectureConfig, ModelParams};
pub use pipeline::PreprocState;
pub use taxonomy::{Task, Taxonomy};
pub use tensor::Tensor;
pub use trainer::{TrainConfig, TrainHistory};

/// Seeded generator used for every stochastic step (init, shuffles, splits).
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Parameter initialization.
pub const STREAM_INIT: u64 = 0;
/// Train/validation splitting.
pub const STREAM_SPLIT: u64 = 1;
/// Per-epoch shuffling.
pub const STREAM_SHUFFLE: u64 = 2;
/// Per-class subsampling of a dataset.
pub const STREAM_SUBSAMPLE: u64 = 3;

/// Independent generator for one stochastic stage, so that stages never
/// perturb each other's draws.
pub fn seeded_rng_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}
