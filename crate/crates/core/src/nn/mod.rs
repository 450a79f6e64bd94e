//! Inference kernels.

pub mod activation;
pub mod block_sparse;
pub mod dense;
pub mod gru;
pub mod sampling;
pub mod segconv;
mod simd;
pub mod sparse;

pub use activation::{exp_f32, sigmoid, softmax, softmax_f32_into, softmax_into, softplus, tanh};
pub use block_sparse::BlockSparse;
pub use dense::{Linear, Matrix};
pub use gru::{gru_step, GruScratch, GruWeights, Recurrent};
pub use sampling::{
    categorical_from_uniform, categorical_sample, gaussian_sample, gaussian_sample_into,
    laplace_from_uniform, laplace_sample, laplace_sample_into, standard_normal,
};
pub use segconv::{segconv, LookaheadWindow, SegConvSpec};
pub use sparse::{sparsify, SparseMatrix};
