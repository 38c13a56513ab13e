//! Dense kernels with hand-written backward passes.
//!
//! Every sequence op works on a packed `[rows, channels]` matrix holding one
//! or more sequences back to back, described by [`Segments`]. Convolutions
//! never read across a segment boundary, so a batch of clauses behaves
//! exactly like the clauses processed one at a time (except for the shared
//! batch-norm statistics).

mod activation;
mod batch_norm;
mod conv;
mod gemm;
mod grad_check;
mod linear;
mod receptive;
mod residual;
mod segments;
mod tensor;

pub use activation::{leaky_relu, leaky_relu_backward, DEFAULT_LEAKY_SLOPE};
pub use batch_norm::{batch_norm, BatchNorm, BnCache};
pub use conv::{conv1d, conv1d_backward, tap_offsets, ConvFilter};
pub use grad_check::{grad_check, GradCheck};
pub use linear::Linear;
pub use receptive::receptive_field;
pub use residual::{residual_block, ConvBn, ConvBnCache, ResidualBlock, ResidualCache};
pub use segments::Segments;
pub use tensor::Tensor;

/// Batch-norm behaviour: batch statistics while training, running
/// statistics at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}
