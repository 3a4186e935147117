use super::{Layer, LayerState};
use crate::error::Result;
use crate::tensor::Tensor;

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential {
    pub layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new(layers: Vec<Box<dyn Layer>>) -> Self {
        Self { layers }
    }

    pub fn push(&mut self, layer: impl Layer + 'static) {
        self.layers.push(Box::new(layer));
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl Layer for Sequential {
    fn kind(&self) -> &'static str {
        "sequential"
    }

    fn forward(&mut self, input: &Tensor, training: bool) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, training)?;
        }
        Ok(x)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = grad_output.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn states(&self) -> Vec<&LayerState> {
        self.layers.iter().flat_map(|l| l.states()).collect()
    }

    fn states_mut(&mut self) -> Vec<&mut LayerState> {
        self.layers.iter_mut().flat_map(|l| l.states_mut()).collect()
    }

    fn activation_pattern(&self, out: &mut Vec<u8>) {
        for layer in &self.layers {
            layer.activation_pattern(out);
        }
    }
}
