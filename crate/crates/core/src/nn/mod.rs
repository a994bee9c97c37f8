//! Small dense networks with exact first- and second-order gradients.

pub mod adam;
pub mod checkpoint;
pub mod dual;
pub mod gaussian;
pub mod mlp;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use dual::{Dual, Scalar};
pub use gaussian::{GaussianPolicyHead, HeadGrad};
pub use mlp::{
    backward_into, backward_params, elu, elu_grad, forward, forward_cached, grad_penalty_backward,
    grad_penalty_into, grad_penalty_with_value_into, init_params, input_gradient,
    param_grad_penalty_into, param_grad_penalty_with_value_into, ForwardCache,
    LayerLayout, MlpSpec, ParamVector,
};
