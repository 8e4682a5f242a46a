//! Self-adaptive semantic segmentation at desk scale.
//!
//! Histogram thresholding (Otsu and relatives) turns raw grayscale images
//! into per-image pseudo-labels, and those pseudo-labels supervise a tiny
//! differentiable encoder-decoder trained with focal-tversky loss. No ground
//! truth is consumed during training; real masks are only touched at
//! evaluation time. The crate also ships the evaluation and ablation
//! harnesses that justify each component choice.
//!
//! # Module map
//!
//! - [`imaging`] — image containers, grayscale conversion, histograms,
//!   bilinear / nearest resize, tiling, PNG/PGM io
//! - [`thresholding`] — fixed, Otsu, minimum-error, generalized histogram
//!   thresholding, adaptive mean/Gaussian; pseudo-mask generation
//! - [`losses`] — bce, focal, dice, tversky, focal-tversky with analytic
//!   gradients w.r.t. predicted probabilities
//! - [`metrics`] — IoU / recall / accuracy and the collapse diagnostic
//! - [`segmenter`] — a 2993-parameter micro U-Net with hand-written forward
//!   and backward passes, Adam updates, checkpoint io
//! - [`pipeline`] — manifests, deterministic splits, augmentation, and a
//!   synthetic blob dataset generator
//! - [`trainer`] — the training loop (self-supervised and supervised),
//!   early stopping, evaluation, multi-seed aggregation
//! - [`cli`] — config files and the command implementations behind the
//!   `sass-seg` binary
//!
//! # Runnable examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release -p sass-seg --example pseudo_masks
//! cargo run --release -p sass-seg --example threshold_curves
//! cargo run --release -p sass-seg --example loss_gradients
//! cargo run --release -p sass-seg --example gradient_check
//! cargo run --release -p sass-seg --example train_selfsup
//! cargo run --release -p sass-seg --example threshold_ablation
//! ```
//!
//! The `sass-seg` binary exposes the same machinery as subcommands
//! (`synth`, `pseudo-mask`, `train`, `eval`, `ablate`); see the README.

pub mod cli;
pub mod error;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod segmenter;
pub mod thresholding;
pub mod trainer;

pub use error::{Error, Result};
