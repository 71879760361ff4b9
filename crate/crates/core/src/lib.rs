//! Multimodal classification by maximum likelihood when modality Y is
//! missing from part of the training data.
//!
//! The joint distribution of two modality features and a label is modeled
//! with a generalized softmax, `Q(x, y, z) ∝ R_X R_Y R_Z exp(φ(f(x), g(y))ᵀ h(z))`.
//! Modality-complete samples are fit through `Q(z | x, y)`; modality-missing
//! samples through `Q(z | x)`, which marginalizes `y` over the observed
//! complete-set values. Both conditionals come from the same encoders, so
//! missing-modality samples still train `f`, `g` and `h`.
//!
//! Modules, bottom-up:
//!
//! - [`autodiff`]: dense tensors and a tape-based reverse-mode engine.
//! - [`model`]: encoders, label table, fusion kinds, checkpoint format.
//! - [`likelihood`]: the two conditionals, the joint-table oracle, the loss.
//! - [`baselines`]: lower-bound and zero-padding objectives.
//! - [`data`]: samples, CSV I/O, splitting, masking, synthetic Gaussians.
//! - [`train`]: Adam training loop, prediction and metrics.
//! - [`sweep`]: the missing-rate × method × fusion × seed grid and its report.
//! - [`config`], [`cli`], [`verify`]: the command-line front end.

pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod likelihood;
pub mod model;
pub mod rng;
pub mod sweep;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
