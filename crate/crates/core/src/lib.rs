//! Non-intrusive load monitoring toolkit.
//!
//! The crate covers the full pipeline from raw smart-meter files to reports:
//!
//! - [`dataset`]: REDD/REFIT parsing, mains/appliance synchronization,
//!   normalization, site-class labeling, and synthetic dataset generation.
//! - [`windowing`]: sliding aggregate windows paired with 3-point appliance
//!   targets.
//! - [`nn`] / [`tensor`]: a from-scratch dense/convolutional network engine
//!   with manual backpropagation, SGD/Adam, layer freezing, and a
//!   finite-difference gradient verifier.
//! - [`nilm`]: the seq2-[3]point disaggregator, transfer training, series
//!   stitching, threshold evaluation, and four-class site evaluation.
//! - [`signature`]: Mexican-hat CWT and STFT appliance signature images,
//!   pixel-wise fusion, augmentation, and balanced train/test splits.
//! - [`classifier`]: signature classifiers (simple deep NN and a compact
//!   2D-CNN with swappable dense heads).
//! - [`behavior`]: power summaries and transient-state histograms.
//! - [`metrics`]: accuracy/precision/recall/F1 and plot-ready CSV/SVG output.
//! - [`checkpoint`]: versioned binary model checkpoints.

pub mod behavior;
pub mod checkpoint;
pub mod classifier;
pub mod dataset;
pub mod metrics;
pub mod nilm;
pub mod nn;
pub mod signature;
pub mod tensor;
pub mod windowing;

pub use tensor::Tensor;
