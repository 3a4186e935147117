//! Differentiable layer primitives with hand-derived backward passes.
//!
//! Every layer caches what it needs during `forward` and consumes that cache
//! in `backward`. Parameter gradients accumulate into [`LayerState`] until
//! [`LayerState::zero_grad`] is called.

mod activation;
mod batchnorm;
mod conv;
mod dropout;
mod linear;
mod pool;
mod sequential;

pub use activation::{
    relu6_backward, relu6_forward, relu_backward, relu_forward, sigmoid_backward,
    sigmoid_forward, Relu6, Sigmoid,
};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNorm2d, BnConfig, BnContext};
pub use conv::{conv2d_backward, conv2d_forward, Conv2d, Conv2dOptions, ConvContext, ConvGrads};
pub use dropout::Dropout;
pub use linear::{linear_backward, linear_forward, Linear, LinearGrads};
pub use pool::{global_avg_pool, global_avg_pool_backward, GlobalAvgPool};
pub use sequential::Sequential;

use crate::error::Result;
use crate::tensor::Tensor;

/// A named learnable tensor and its accumulated gradient.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros_like(&value);
        Self { name: name.into(), value, grad }
    }
}

/// A named non-learnable tensor, e.g. batchnorm running statistics.
#[derive(Clone, Debug)]
pub struct Buffer {
    pub name: String,
    pub value: Tensor,
}

/// Parameters, gradients, running statistics and the trainable flag of one layer.
#[derive(Clone, Debug)]
pub struct LayerState {
    pub params: Vec<Param>,
    pub running_stats: Vec<Buffer>,
    pub trainable: bool,
}

impl LayerState {
    pub fn new(params: Vec<Param>) -> Self {
        Self { params, running_stats: Vec::new(), trainable: true }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn param(&self, suffix: &str) -> &Param {
        self.params
            .iter()
            .find(|p| p.name.ends_with(suffix))
            .unwrap_or_else(|| panic!("layer has no parameter ending in {suffix:?}"))
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// A differentiable computation with optional learnable state.
pub trait Layer: Send {
    /// Short type tag used in listings and diagnostics.
    fn kind(&self) -> &'static str;

    fn forward(&mut self, input: &Tensor, training: bool) -> Result<Tensor>;

    /// Consumes the cache of the preceding `forward`, accumulates parameter
    /// gradients for trainable state and returns the gradient w.r.t. the input.
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;

    fn states(&self) -> Vec<&LayerState> {
        Vec::new()
    }

    fn states_mut(&mut self) -> Vec<&mut LayerState> {
        Vec::new()
    }

    fn num_params(&self) -> usize {
        self.states().iter().map(|s| s.num_params()).sum()
    }

    fn zero_grad(&mut self) {
        for s in self.states_mut() {
            s.zero_grad();
        }
    }

    /// Appends, for every input cached by a piecewise-linear activation in
    /// the last forward, which linear piece it fell on. Two forwards with
    /// equal patterns lie in the same smooth region of the network.
    fn activation_pattern(&self, _out: &mut Vec<u8>) {}
}

/// Passes its input through unchanged.
#[derive(Debug, Default)]
pub struct Identity;

impl Layer for Identity {
    fn kind(&self) -> &'static str {
        "identity"
    }

    fn forward(&mut self, input: &Tensor, _training: bool) -> Result<Tensor> {
        Ok(input.clone())
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        Ok(grad_output.clone())
    }
}

pub(crate) fn missing_ctx(kind: &str) -> crate::error::Error {
    crate::error::Error::Usage(format!("{kind}: backward called without a preceding forward"))
}
