use super::{missing_ctx, Layer};
use crate::error::Result;
use crate::tensor::Tensor;

pub fn relu6_forward(input: &Tensor) -> Tensor {
    input.map(|v| v.clamp(0.0, 6.0))
}

/// Gradient passes where `0 < x < 6`.
pub fn relu6_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.check_same_shape(grad_out)?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 && x < 6.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape(), data)
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.check_same_shape(grad_out)?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape(), data)
}

// Largest f32 below 1.0; keeps saturated gates strictly inside (0, 1).
const SIGMOID_MAX: f32 = 1.0 - f32::EPSILON / 2.0;

fn sigmoid(x: f32) -> f32 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f32::MIN_POSITIVE, SIGMOID_MAX)
}

pub fn sigmoid_forward(input: &Tensor) -> Tensor {
    input.map(sigmoid)
}

/// Takes the forward *output* `y`: `dy/dx = y (1 - y)`.
pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    output.check_same_shape(grad_out)?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| g * y * (1.0 - y))
        .collect();
    Tensor::new(output.shape(), data)
}

#[derive(Default)]
pub struct Relu6 {
    input: Option<Tensor>,
}

impl Layer for Relu6 {
    fn kind(&self) -> &'static str {
        "relu6"
    }

    fn forward(&mut self, input: &Tensor, _training: bool) -> Result<Tensor> {
        self.input = Some(input.clone());
        Ok(relu6_forward(input))
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.input.take().ok_or_else(|| missing_ctx("relu6"))?;
        relu6_backward(&input, grad_output)
    }

    fn activation_pattern(&self, out: &mut Vec<u8>) {
        if let Some(x) = &self.input {
            out.extend(x.data().iter().map(|&v| relu6_piece(v)));
        }
    }
}

/// 0 below the lower clip, 1 on the identity piece, 2 at or above 6 — the
/// same split the backward pass uses.
pub(crate) fn relu6_piece(v: f32) -> u8 {
    if v <= 0.0 {
        0
    } else if v < 6.0 {
        1
    } else {
        2
    }
}

#[derive(Default)]
pub struct Sigmoid {
    output: Option<Tensor>,
}

impl Layer for Sigmoid {
    fn kind(&self) -> &'static str {
        "sigmoid"
    }

    fn forward(&mut self, input: &Tensor, _training: bool) -> Result<Tensor> {
        let y = sigmoid_forward(input);
        self.output = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let y = self.output.take().ok_or_else(|| missing_ctx("sigmoid"))?;
        sigmoid_backward(&y, grad_output)
    }
}
