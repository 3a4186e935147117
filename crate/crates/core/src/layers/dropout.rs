use super::{missing_ctx, Layer};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

/// Inverted dropout: kept activations are scaled by `1 / (1 - rate)` during
/// training; evaluation is the identity.
pub struct Dropout {
    pub rate: f32,
    rng: Rng,
    mask: Option<Vec<f32>>,
}

impl Dropout {
    pub fn new(rate: f32, rng: Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must be in [0,1), got {rate}")));
        }
        Ok(Self { rate, rng, mask: None })
    }
}

impl Layer for Dropout {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn forward(&mut self, input: &Tensor, training: bool) -> Result<Tensor> {
        if !training || self.rate == 0.0 {
            self.mask = Some(vec![1.0; input.len()]);
            return Ok(input.clone());
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f32> = (0..input.len())
            .map(|_| if self.rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        let data = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        self.mask = Some(mask);
        Tensor::new(input.shape(), data)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mask = self.mask.take().ok_or_else(|| missing_ctx("dropout"))?;
        if mask.len() != grad_output.len() {
            return Err(Error::Shape("dropout grad_output does not match forward input".into()));
        }
        let data = grad_output.data().iter().zip(&mask).map(|(g, m)| g * m).collect();
        Tensor::new(grad_output.shape(), data)
    }
}
