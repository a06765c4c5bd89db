//! Unsupervised audiovisual phonetic category learning.
//!
//! The pipeline turns speech audio and mouth-region video into per-window
//! feature vectors, clusters them with a Dirichlet-process Gaussian mixture
//! fitted by collapsed Gibbs sampling, and measures how well the learned
//! clusters separate phonemes with an ABX discrimination battery (dynamic
//! time warping over symmetrized KL divergence between cluster posteriors).
//!
//! ```text
//! wav ──► audio (MFCC + deltas) ──┐
//!                                  ├─► fusion ─► dpgmm ─► posteriors ─► abx
//! frames ─► visual (eigenmouths) ─┘
//! ```
//!
//! Module map:
//!
//! - [`audio`]: windowing, MFCC, deltas, noise injection.
//! - [`visual`]: grayscale crops, eigenmouth PCA, frame matching.
//! - [`fusion`]: modality layouts and concatenated feature sequences.
//! - [`dpgmm`]: the mixture model, sampler, posteriors and model files.
//! - [`abx`]: alignments, batteries, divergence, DTW, scoring, statistics.
//! - [`corpus`]: the on-disk corpus layout.
//! - [`synth`]: synthetic multimodal corpora with known categories.
//! - [`experiment`]: the train/test modality matrix, reports and comparisons.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abx;
pub mod audio;
pub mod container;
pub mod corpus;
pub mod dpgmm;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod synth;
pub mod visual;

pub use error::{Error, Result};
pub use fusion::{FeatureSequence, Modality, ModalityLayout};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
