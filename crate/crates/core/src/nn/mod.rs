//! A small dense network engine.
//!
//! Every op has a forward function and a matching backward function that
//! accumulates gradients; models compose them by hand in reverse order.
//! Values are generic over [`Real`] so the same code runs in 32-bit for
//! training and in 64-bit for gradient checks.

mod adam;
mod checkpoint;
mod ops;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, ModelKind, CHECKPOINT_VERSION};
pub use ops::{
    affine, affine_backward, argmax, attention_pool, attention_pool_backward, cross_entropy,
    cross_entropy_backward, dropout, dropout_backward, embedding_backward, embedding_lookup,
    softmax, softmax_backward, softmax_cross_entropy_backward, tanh, tanh_backward, top_two,
};
pub use tensor::{Real, Tensor};
