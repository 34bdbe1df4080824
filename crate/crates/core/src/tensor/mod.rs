//! Dense-matrix reverse-mode differentiation and the Adam optimizer.

pub mod adam;
pub mod gradcheck;
pub mod mat;
pub mod tape;

pub use adam::{adam_step, AdamState, Bound, ParamStore};
pub use gradcheck::{grad_check, GradCheckReport};
pub use mat::{bce_logit, sigmoid, softplus, Mat};
pub use tape::{
    bce_with_logits_sum, sampled_gram_bce, softmax_cross_entropy_masked, Tape, Tensor, TensorError,
};
