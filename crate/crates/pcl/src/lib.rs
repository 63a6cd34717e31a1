//! Positional contrastive learning on volumetric slice data.
//!
//! The crate trains a small encoder with a contrastive objective in which
//! positive pairs are decided by the normalized z-position of 2D slices in
//! their source volumes: slices closer than a threshold `t` count as
//! positive, everything else as negative. Alternative pairing strategies
//! (augmentation twins only, fixed volume partitions) are implemented
//! behind the same mask interface so their false-negative behaviour and
//! downstream segmentation quality can be compared on synthetic phantoms.
//!
//! Module map:
//! - [`autodiff`] — dense f64 tensors with reverse-mode differentiation
//! - [`volume`] — phantom generation, preprocessing, slicing, sampling, VVOL files
//! - [`augment`] — position-preserving spatial augmentations, 2N batch assembly
//! - [`pairing`] — positive-pair masks (position / twins / partition) and
//!   false-negative accounting
//! - [`loss`] — the multi-positive contrastive objective
//! - [`model`] — encoder, projection head, segmentation head, checkpoints
//! - [`train`] — optimizers, schedules, pretrain/fine-tune loops, Dice,
//!   cross-validation and transfer experiments
//!
//! See `examples/` for one runnable program per capability and the `pcl`
//! binary for the file-driven command line.

pub mod augment;
pub mod autodiff;
pub mod error;
pub mod loss;
pub mod model;
pub mod pairing;
pub mod rng;
pub mod train;
pub mod volume;

pub use error::{Error, Result};
