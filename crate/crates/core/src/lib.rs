//! Allocation-only core of the black-box interpretation toolkit.
//!
//! The crate trains a convolutional autoencoder classifier on tabular data
//! and interprets it: attention probing and perturbation sensitivity rank the
//! input features, tree surrogates are fitted on the top-ranked subspace, and
//! Shapley values, permutation importance, decision lists and counterfactuals
//! explain the surrogate globally and per instance.
//!
//! Everything here is `no_std` + `alloc`. File formats, configuration, the
//! command line and thread-level parallelism live in the companion `xai`
//! crate.
#![no_std]
#![deny(rust_2018_idioms, missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod autodiff;
pub mod blackbox;
pub mod data;
mod error;
pub mod layers;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod probe;
pub mod rng;
pub mod rules;
pub mod surrogate;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{Classifier, FnClassifier};
