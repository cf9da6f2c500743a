//! Few-shot specific emitter identification.
//!
//! The pipeline has two stages. Offline, a complex-valued CNN embedding is
//! trained on an auxiliary set of emitters with a hybrid loss (softmax
//! cross-entropy plus weighted triplet and center terms). Online, each
//! embedding is frozen and a logistic-regression classifier is fitted on a
//! handful of labelled bursts per new emitter; several independently trained
//! embeddings vote by averaging class probabilities.
//!
//! Because real captures are not bundled, [`signal_sim`] synthesizes
//! ADS-B-like bursts carrying per-emitter hardware impairments.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baseline;
pub mod complex_nn;
pub mod error;
pub mod fewshot;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod signal_sim;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
