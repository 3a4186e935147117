//! Per-channel batch normalization over (N, H, W).

use super::{missing_ctx, Buffer, Layer, LayerState, Param};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BnConfig {
    pub momentum: f32,
    pub eps: f32,
}

impl Default for BnConfig {
    fn default() -> Self {
        Self { momentum: 0.1, eps: 1e-5 }
    }
}

/// Normalized activations and per-channel scale saved for backward.
#[derive(Clone, Debug)]
pub struct BnContext {
    x_hat: Tensor,
    inv_std: Vec<f32>,
    gamma: Vec<f32>,
    training: bool,
}

fn check_state(state: &LayerState, c: usize) -> Result<()> {
    if state.params.len() != 2 || state.running_stats.len() != 2 {
        return Err(Error::Shape("batchnorm state needs gamma, beta, running_mean, running_var".into()));
    }
    for t in state.params.iter().map(|p| &p.value).chain(state.running_stats.iter().map(|b| &b.value)) {
        if t.shape() != [c] {
            return Err(Error::Shape(format!("batchnorm channel axis is {c}, state tensor has shape {:?}", t.shape())));
        }
    }
    Ok(())
}

/// Batch normalization. In training mode the batch statistics normalize the
/// input and update the running statistics as
/// `running = (1 - momentum) * running + momentum * batch`
/// (the running variance uses the unbiased batch estimate). In eval mode the
/// running statistics are used and the state is not touched.
pub fn batchnorm_forward(
    input: &Tensor,
    state: &mut LayerState,
    training: bool,
    cfg: BnConfig,
) -> Result<(Tensor, BnContext)> {
    if !(cfg.eps > 0.0) {
        return Err(Error::Config(format!("batchnorm eps must be > 0, got {}", cfg.eps)));
    }
    if !(0.0..=1.0).contains(&cfg.momentum) {
        return Err(Error::Config(format!("batchnorm momentum must be in [0,1], got {}", cfg.momentum)));
    }
    let (n, c, h, w) = input.dims4()?;
    check_state(state, c)?;
    let plane = h * w;
    let count = n * plane;
    let x = input.data();

    let (mean, var): (Vec<f32>, Vec<f32>) = if training {
        let mut mean = vec![0.0f32; c];
        let mut var = vec![0.0f32; c];
        for ch in 0..c {
            let mut sum = 0.0f64;
            for ni in 0..n {
                let off = (ni * c + ch) * plane;
                sum += x[off..off + plane].iter().map(|&v| v as f64).sum::<f64>();
            }
            let mu = sum / count as f64;
            let mut sq = 0.0f64;
            for ni in 0..n {
                let off = (ni * c + ch) * plane;
                sq += x[off..off + plane].iter().map(|&v| (v as f64 - mu).powi(2)).sum::<f64>();
            }
            mean[ch] = mu as f32;
            var[ch] = (sq / count as f64) as f32;
            let unbiased = if count > 1 { sq / (count - 1) as f64 } else { sq };
            let m = cfg.momentum;
            let rm = &mut state.running_stats[0].value.data_mut()[ch];
            *rm = (1.0 - m) * *rm + m * mean[ch];
            let rv = &mut state.running_stats[1].value.data_mut()[ch];
            *rv = (1.0 - m) * *rv + m * unbiased as f32;
        }
        (mean, var)
    } else {
        (
            state.running_stats[0].value.data().to_vec(),
            state.running_stats[1].value.data().to_vec(),
        )
    };

    let gamma = state.params[0].value.data().to_vec();
    let beta = state.params[1].value.data();
    // Normalize and affine in f64 so each output is rounded once.
    let inv_std64: Vec<f64> = var.iter().map(|&v| 1.0 / (v as f64 + cfg.eps as f64).sqrt()).collect();
    let inv_std: Vec<f32> = inv_std64.iter().map(|&v| v as f32).collect();
    let mut x_hat = vec![0.0f32; x.len()];
    let mut out = vec![0.0f32; x.len()];
    for ni in 0..n {
        for ch in 0..c {
            let off = (ni * c + ch) * plane;
            let (mu, is, g, b) = (mean[ch] as f64, inv_std64[ch], gamma[ch] as f64, beta[ch] as f64);
            for i in off..off + plane {
                let xh = (x[i] as f64 - mu) * is;
                x_hat[i] = xh as f32;
                out[i] = (xh * g + b) as f32;
            }
        }
    }
    let shape = input.shape();
    Ok((Tensor::new(shape, out)?, BnContext { x_hat: Tensor::new(shape, x_hat)?, inv_std, gamma, training }))
}

/// Returns `(grad_input, grad_gamma, grad_beta)`.
pub fn batchnorm_backward(ctx: &BnContext, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    ctx.x_hat.check_same_shape(grad_out)?;
    let (n, c, h, w) = grad_out.dims4()?;
    let plane = h * w;
    let count = (n * plane) as f64;
    let dy = grad_out.data();
    let xh = ctx.x_hat.data();
    let mut dgamma = vec![0.0f32; c];
    let mut dbeta = vec![0.0f32; c];
    let mut dx = vec![0.0f32; dy.len()];
    for ch in 0..c {
        let (mut sum_dy, mut sum_dy_xh) = (0.0f64, 0.0f64);
        for ni in 0..n {
            let off = (ni * c + ch) * plane;
            for i in off..off + plane {
                sum_dy += dy[i] as f64;
                sum_dy_xh += (dy[i] * xh[i]) as f64;
            }
        }
        dgamma[ch] = sum_dy_xh as f32;
        dbeta[ch] = sum_dy as f32;
        let k = ctx.gamma[ch] * ctx.inv_std[ch];
        let mean_dy = (sum_dy / count) as f32;
        let mean_dy_xh = (sum_dy_xh / count) as f32;
        for ni in 0..n {
            let off = (ni * c + ch) * plane;
            for i in off..off + plane {
                dx[i] = if ctx.training {
                    k * (dy[i] - mean_dy - xh[i] * mean_dy_xh)
                } else {
                    k * dy[i]
                };
            }
        }
    }
    Ok((
        Tensor::new(grad_out.shape(), dx)?,
        Tensor::new(&[c], dgamma)?,
        Tensor::new(&[c], dbeta)?,
    ))
}

pub struct BatchNorm2d {
    pub state: LayerState,
    pub cfg: BnConfig,
    ctx: Option<BnContext>,
}

impl BatchNorm2d {
    /// gamma = 1, beta = 0, running mean 0, running var 1.
    pub fn new(name: &str, channels: usize, cfg: BnConfig) -> Self {
        let mut state = LayerState::new(vec![
            Param::new(format!("{name}.weight"), Tensor::ones(&[channels])),
            Param::new(format!("{name}.bias"), Tensor::zeros(&[channels])),
        ]);
        state.running_stats = vec![
            Buffer { name: format!("{name}.running_mean"), value: Tensor::zeros(&[channels]) },
            Buffer { name: format!("{name}.running_var"), value: Tensor::ones(&[channels]) },
        ];
        Self { state, cfg, ctx: None }
    }
}

impl Layer for BatchNorm2d {
    fn kind(&self) -> &'static str {
        "batchnorm2d"
    }

    fn forward(&mut self, input: &Tensor, training: bool) -> Result<Tensor> {
        let (out, ctx) = batchnorm_forward(input, &mut self.state, training, self.cfg)?;
        self.ctx = Some(ctx);
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let ctx = self.ctx.take().ok_or_else(|| missing_ctx("batchnorm2d"))?;
        let (dx, dgamma, dbeta) = batchnorm_backward(&ctx, grad_output)?;
        if self.state.trainable {
            self.state.params[0].grad.add_assign(&dgamma)?;
            self.state.params[1].grad.add_assign(&dbeta)?;
        }
        Ok(dx)
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
    use crate::tensor::Rng;

    #[test]
    fn training_mode_standardizes() {
        let mut rng = Rng::new(4);
        let x = Tensor::uniform(&[4, 3, 5, 5], -3.0, 7.0, &mut rng);
        let mut bn = BatchNorm2d::new("bn", 3, BnConfig::default());
        let y = bn.forward(&x, true).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|n| y.data()[(n * 3 + ch) * 25..(n * 3 + ch + 1) * 25].to_vec())
                .map(|v| v as f64)
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-4, "mean {m}");
            assert!((v - 1.0).abs() < 1e-4, "var {v}");
        }
    }

    #[test]
    fn zero_gamma_outputs_beta() {
        let mut rng = Rng::new(5);
        let x = Tensor::uniform(&[2, 2, 3, 3], -1.0, 1.0, &mut rng);
        let mut bn = BatchNorm2d::new("bn", 2, BnConfig::default());
        bn.state.params[0].value.fill(0.0);
        bn.state.params[1].value = Tensor::new(&[2], vec![0.25, -1.5]).unwrap();
        for training in [true, false] {
            let y = bn.forward(&x, training).unwrap();
            for n in 0..2 {
                for ch in 0..2 {
                    let want = [0.25, -1.5][ch];
                    assert!(y.data()[(n * 2 + ch) * 9..(n * 2 + ch + 1) * 9].iter().all(|&v| v == want));
                }
            }
        }
    }

    #[test]
    fn eval_mode_matches_scalar_oracle_and_is_pure() {
        let mut rng = Rng::new(6);
        let x = Tensor::uniform(&[2, 3, 4, 4], -2.0, 2.0, &mut rng);
        let mut bn = BatchNorm2d::new("bn", 3, BnConfig::default());
        bn.state.params[0].value = Tensor::uniform(&[3], 0.5, 1.5, &mut rng);
        bn.state.params[1].value = Tensor::uniform(&[3], -0.5, 0.5, &mut rng);
        bn.state.running_stats[0].value = Tensor::uniform(&[3], -0.5, 0.5, &mut rng);
        bn.state.running_stats[1].value = Tensor::uniform(&[3], 0.5, 2.0, &mut rng);
        let before = bn.state.running_stats[1].value.clone();
        let y = bn.forward(&x, false).unwrap();
        let y2 = bn.forward(&x, false).unwrap();
        assert_eq!(y, y2);
        assert_eq!(before, bn.state.running_stats[1].value);
        for i in 0..x.len() {
            let ch = (i / 16) % 3;
            let mu = bn.state.running_stats[0].value.data()[ch] as f64;
            let var = bn.state.running_stats[1].value.data()[ch] as f64;
            let g = bn.state.params[0].value.data()[ch] as f64;
            let b = bn.state.params[1].value.data()[ch] as f64;
            let want = (x.data()[i] as f64 - mu) / (var + 1e-5).sqrt() * g + b;
            assert!((y.data()[i] as f64 - want).abs() < 1e-6);
        }
    }

    #[test]
    fn running_stats_update_rule() {
        let x = Tensor::new(&[1, 1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bn = BatchNorm2d::new("bn", 1, BnConfig::default());
        bn.forward(&x, true).unwrap();
        // mean 2.5, unbiased var 5/3
        assert!((bn.state.running_stats[0].value.data()[0] - 0.25).abs() < 1e-7);
        let want = 0.9 + 0.1 * 5.0 / 3.0;
        assert!((bn.state.running_stats[1].value.data()[0] - want).abs() < 1e-6);
    }

    #[test]
    fn non_positive_eps_is_config_error() {
        let mut bn = BatchNorm2d::new("bn", 1, BnConfig { momentum: 0.1, eps: 0.0 });
        assert!(matches!(bn.forward(&Tensor::zeros(&[1, 1, 2, 2]), true), Err(Error::Config(_))));
    }
}
