//! Differentiable dense-array core: tensors, a reverse-mode tape, parameter
//! storage, Adam, and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::grad_check;
pub use graph::{Gradients, Graph, Var};
pub use params::{init_normal, Moments, ParamStore};
pub use tensor::{
    add, add_bias, causal_softmax, cross_entropy_masked, embedding, gelu, layer_norm, matmul, mul,
    scale, softmax, transpose, Tensor,
};
