use super::{missing_ctx, Layer, LayerState, Param};
use crate::error::{Error, Result};
use crate::tensor::{he_init, Rng, Tensor};

/// `y = x W^T + b` for `x` of shape (N, F) and `W` of shape (K, F).
pub fn linear_forward(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (n, f) = input.dims2()?;
    let (k, wf) = weight.dims2()?;
    if f != wf {
        return Err(Error::Shape(format!("linear feature axis: input has {f}, weight expects {wf}")));
    }
    if let Some(b) = bias {
        if b.shape() != [k] {
            return Err(Error::Shape(format!("linear bias must have shape [{k}], got {:?}", b.shape())));
        }
    }
    let x = input.data();
    let w = weight.data();
    let mut out = vec![0.0f32; n * k];
    for i in 0..n {
        let xi = &x[i * f..(i + 1) * f];
        for j in 0..k {
            let wj = &w[j * f..(j + 1) * f];
            let dot: f64 = xi.iter().zip(wj).map(|(&a, &b)| a as f64 * b as f64).sum();
            out[i * k + j] = (dot + bias.map_or(0.0, |b| b.data()[j] as f64)) as f32;
        }
    }
    Tensor::new(&[n, k], out)
}

#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn linear_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> Result<LinearGrads> {
    let (n, f) = input.dims2()?;
    let (k, _) = weight.dims2()?;
    if grad_out.shape() != [n, k] {
        return Err(Error::Shape(format!("linear grad_output shape {:?}, expected [{n}, {k}]", grad_out.shape())));
    }
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    let mut gx = vec![0.0f32; n * f];
    let mut gw = vec![0.0f32; k * f];
    let mut gb = vec![0.0f32; k];
    for i in 0..n {
        let xi = &x[i * f..(i + 1) * f];
        for j in 0..k {
            let gij = g[i * k + j];
            gb[j] += gij;
            let wj = &w[j * f..(j + 1) * f];
            for (dst, &wv) in gx[i * f..(i + 1) * f].iter_mut().zip(wj) {
                *dst += gij * wv;
            }
            for (dst, &xv) in gw[j * f..(j + 1) * f].iter_mut().zip(xi) {
                *dst += gij * xv;
            }
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(&[n, f], gx)?,
        weight: Tensor::new(&[k, f], gw)?,
        bias: Tensor::new(&[k], gb)?,
    })
}

/// Fully connected layer with bias.
pub struct Linear {
    pub state: LayerState,
    input: Option<Tensor>,
}

impl Linear {
    /// He-initialized weight, zero bias.
    pub fn new(name: &str, in_features: usize, out_features: usize, rng: &mut Rng) -> Result<Self> {
        let weight = he_init(&[out_features, in_features], rng)?;
        Ok(Self {
            state: LayerState::new(vec![
                Param::new(format!("{name}.weight"), weight),
                Param::new(format!("{name}.bias"), Tensor::zeros(&[out_features])),
            ]),
            input: None,
        })
    }
}

impl Layer for Linear {
    fn kind(&self) -> &'static str {
        "linear"
    }

    fn forward(&mut self, input: &Tensor, _training: bool) -> Result<Tensor> {
        let out = linear_forward(input, &self.state.params[0].value, Some(&self.state.params[1].value))?;
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.input.take().ok_or_else(|| missing_ctx("linear"))?;
        let grads = linear_backward(&input, &self.state.params[0].value, grad_output)?;
        if self.state.trainable {
            self.state.params[0].grad.add_assign(&grads.weight)?;
            self.state.params[1].grad.add_assign(&grads.bias)?;
        }
        Ok(grads.input)
    }

    fn states(&self) -> Vec<&LayerState> {
        vec![&self.state]
    }

    fn states_mut(&mut self) -> Vec<&mut LayerState> {
        vec![&mut self.state]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_param_count() {
        let l = Linear::new("head", 1280, 3, &mut Rng::new(0)).unwrap();
        assert_eq!(l.num_params(), 3843);
    }

    #[test]
    fn small_forward() {
        let x = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(&[2, 2], vec![1.0, 0.0, 3.0, -1.0]).unwrap();
        let b = Tensor::new(&[2], vec![0.5, 0.0]).unwrap();
        assert_eq!(linear_forward(&x, &w, Some(&b)).unwrap().data(), &[1.5, 1.0]);
        assert!(matches!(linear_forward(&Tensor::zeros(&[1, 3]), &w, None), Err(Error::Shape(_))));
    }
}
