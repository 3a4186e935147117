use super::{missing_ctx, Layer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean over each H×W plane: (N, C, H, W) -> (N, C).
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    if plane == 0 {
        return Err(Error::Shape("global_avg_pool needs H·W ≥ 1".into()));
    }
    let data = input
        .data()
        .chunks(plane)
        .map(|p| (p.iter().map(|&v| v as f64).sum::<f64>() / plane as f64) as f32)
        .collect();
    Tensor::new(&[n, c], data)
}

/// Spreads each (n, c) gradient uniformly over its plane.
pub fn global_avg_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = *input_shape else {
        return Err(Error::Shape(format!("pool input shape must be rank 4, got {input_shape:?}")));
    };
    if grad_out.shape() != [n, c] {
        return Err(Error::Shape(format!("pool grad_output shape {:?}, expected [{n}, {c}]", grad_out.shape())));
    }
    let plane = h * w;
    let inv = 1.0 / plane as f32;
    let mut out = Vec::with_capacity(n * c * plane);
    for &g in grad_out.data() {
        out.extend(std::iter::repeat_n(g * inv, plane));
    }
    Tensor::new(input_shape, out)
}

#[derive(Default)]
pub struct GlobalAvgPool {
    input_shape: Option<Vec<usize>>,
}

impl Layer for GlobalAvgPool {
    fn kind(&self) -> &'static str {
        "global_avg_pool"
    }

    fn forward(&mut self, input: &Tensor, _training: bool) -> Result<Tensor> {
        let out = global_avg_pool(input)?;
        self.input_shape = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.take().ok_or_else(|| missing_ctx("global_avg_pool"))?;
        global_avg_pool_backward(&shape, grad_output)
    }
}
