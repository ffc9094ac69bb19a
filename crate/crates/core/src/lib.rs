//! Elimination-compensation pruning for fully-connected networks.
//!
//! Each weight is scored by how much the network output changes, to first
//! order and in mean square over the data, when the weight is removed and the
//! bias of the same unit is shifted to absorb as much of the loss as
//! possible. The score and the optimal shift have a closed form in three
//! sensitivity moments gathered in one pass over the data.
//!
//! Alongside the method the crate carries the pieces needed to compare it:
//! a small MLP with backprop and Adam, magnitude / gradient / random /
//! brute-force baselines, data loaders, independent finite-difference
//! oracles, a binary checkpoint format and a train → prune → fine-tune
//! experiment harness.
//!
//! ```
//! use ecprune::data::{synth_regression, SynthKind};
//! use ecprune::network::{Activation, Network};
//! use ecprune::pruning::{apply_prune, compute_scores, select_mask, PruneConfig};
//! use ecprune::training::LossKind;
//!
//! let data = synth_regression(SynthKind::Sine1d, 64, 0).unwrap();
//! let net = Network::random(&[1, 8, 1], Activation::prelu(), 0).unwrap();
//! let (scores, comp) = compute_scores(&net, &data, &PruneConfig::default(), LossKind::MeanSquaredError).unwrap();
//! let mask = select_mask(&scores, 0.5).unwrap();
//! let pruned = apply_prune(&net, &mask, Some(&comp)).unwrap();
//! assert_eq!(mask.nonzero_count(), 8);
//! # let _ = pruned;
//! ```

pub mod checkpoint;
pub mod data;
mod error;
pub mod harness;
pub mod matrix;
pub mod network;
pub mod pruning;
pub mod training;
pub mod verification;

pub use error::{Error, Result};
