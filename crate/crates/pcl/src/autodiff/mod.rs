//! Minimal dense-tensor numeric core with reverse-mode differentiation.
//!
//! Big enough to express the encoder, projection head, segmentation head,
//! and the contrastive objective; nothing more. All arithmetic is f64.
//! A graph and its tensors stay on one thread for the duration of a step;
//! plain values move freely between steps.

mod check;
mod graph;
mod tensor;

pub use check::grad_check;
pub use graph::{Axis, GradientMap, Graph, L2_NORM_EPS};
pub use tensor::{NodeRef, Tensor};
