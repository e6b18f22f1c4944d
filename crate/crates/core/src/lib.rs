//! Soft winner-take-all networks trained by local Hebbian plasticity.
//!
//! A [`WtaLayer`] computes cosine pre-activations against its weight rows,
//! turns them into a posterior over hidden causes with a soft (or hard)
//! winner-take-all, and learns online with two local rules: a Hebbian weight
//! update `Δw_ik = η·y_k·(x_i − u_k·w_ik)` and a bias update whose
//! equilibrium is the log prior of each cause.
//!
//! Alongside the layer the crate carries everything needed to check it:
//!
//! - [`math`]: normalization, similarity, stable softmax variants, activations
//! - [`layer`]: the layer, both plasticity rules, schedules and the epoch loop
//! - [`oracle`]: synthetic directional mixtures with known centroids and priors
//! - [`readout`]: linear softmax readout, a two-layer MLP baseline, optimizers
//! - [`eval`]: neuron labeling, accuracy, post-hoc cross-entropy with replay
//! - [`adversarial`]: L∞ PGD against differentiable pipelines
//! - [`dataset`]: in-memory labeled datasets and preprocessing
//!
//! The crate is `no_std` and only needs `alloc`; file formats, dataset
//! loading and the command line live in the `softhebb` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversarial;
pub mod dataset;
mod error;
pub mod eval;
pub mod fmath;
pub mod layer;
pub mod math;
pub mod oracle;
pub mod readout;
pub mod rng;

pub use error::{Error, Result};
pub use layer::{
    BiasMode, InferenceMode, LayerOutput, LearningRateSchedule, WeightInit, WtaLayer,
};
pub use math::ActivationKind;
