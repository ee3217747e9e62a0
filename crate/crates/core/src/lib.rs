//! Taguchi orthogonal-array hyperparameter search for feed-forward regression networks.
//!
//! The crate covers the whole loop:
//!
//! - [`design`]: 3-level orthogonal arrays (L9/L27) and decoding of runs into [`design::HyperConfig`]s.
//! - [`network`]: a dense multilayer perceptron with exact backpropagation of the mean-squared loss.
//! - [`optim`]: Adam, Adamax and RMSprop over flat parameter buffers.
//! - [`pipeline`]: the composite-stiffness dataset schema, CSV ingestion, min-max scaling,
//!   splitting, a synthetic data generator and stiffness post-processing.
//! - [`training`]: early-stopped training of one configuration and execution of a whole design.
//! - [`analysis`]: R²/MAE/MSE/RMSE, main effects, S/N ratios and optimum selection.
//! - [`report`]: CSV/JSON file formats shared by the command-line tool.
//!
//! With the default `parallel` feature, design runs and synthetic sample generation are spread
//! across a rayon pool. Without it every loop runs sequentially. Each unit of work derives its own
//! seed, so results do not depend on the feature or the worker count.

pub mod analysis;
pub mod design;
mod error;
pub mod network;
pub mod optim;
pub mod pipeline;
pub mod report;
pub mod training;

pub use error::{Error, Result};

/// Derives an independent stream seed from a base seed and a stream index.
///
/// SplitMix64 finalizer over `base + index * golden`; cheap and well mixed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
