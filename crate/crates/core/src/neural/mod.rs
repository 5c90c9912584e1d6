//! From-scratch neural network kernels: dense n-d tensors, 3-D
//! convolution, max pooling, batch normalization, dense layers,
//! activations, the Adam optimizer, a learning-rate plateau scheduler
//! and a finite-difference gradient checker.
//!
//! Every kernel is generic over [`Scalar`] so the same code runs in
//! `f32` for training and in `f64` when gradients are verified against
//! central differences.

use alloc::vec::Vec;

pub mod adam;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod norm;
pub mod ops;
pub mod pool;
pub mod schedule;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use conv::{conv3d_backward, conv3d_forward};
pub use dense::{dense_backward, dense_forward};
pub use gradcheck::{finite_diff_check, GradCheckConfig, GradCheckReport};
pub use norm::{BatchNorm, BnCache};
pub use ops::{
    argmax_row, cross_entropy_loss_grad, dropout_backward, dropout_forward, relu_backward,
    relu_forward, sigmoid_renorm_loss_grad, sigmoid_renorm_probs, softmax_probs,
};
pub use pool::{maxpool2_backward, maxpool2_forward};
pub use schedule::{PlateauConfig, PlateauScheduler};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape {shape:?} implies {expected} elements, got {got}")]
    ElementCount {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("{op}: {why}")]
    BadArgument { op: &'static str, why: &'static str },
    #[error("batch normalization in training mode needs a batch of at least 2, got {0}")]
    BatchTooSmall(usize),
}
