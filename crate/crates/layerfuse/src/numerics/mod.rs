//! Dense f64 tensors, a portable deterministic Prng, the differentiable
//! kernels every interface is built from, a finite-difference oracle, and a
//! Jacobi eigensolver.

pub mod eig;
pub mod kernels;
pub mod prng;
pub mod tensor;

pub use eig::sym_eig;
pub use kernels::{
    affine, affine_backward, conv1d_layer_axis, conv1d_layer_axis_backward, conv1d_output_len,
    finite_diff_grad, gelu, gelu_backward, grad_rel_err, layer_norm, layer_norm_backward, matmul,
    normal_cdf, softmax, softmax_slice, softmax_slice_backward, transpose,
};
pub use prng::Prng;
pub use tensor::Tensor;
