//! Squeeze-and-Excitation channel attention.
//!
//! For a feature map `U` of shape (N, C, H, W):
//!
//! * squeeze: `z_c = 1/(H·W) Σ_i Σ_j u_c(i, j)`
//! * excite:  `s = σ(W2 · δ(W1 · z + b1) + b2)` with `δ` = ReLU, `σ` = sigmoid,
//!   `W1 ∈ R^{d×C}`, `W2 ∈ R^{C×d}`, `d = max(C / r, 1)`
//! * scale:   `x_c = s_c · u_c`

use crate::error::{Error, Result};
use crate::layers::{
    global_avg_pool, global_avg_pool_backward, linear_backward, linear_forward, missing_ctx, relu_backward,
    relu_forward, sigmoid_backward, sigmoid_forward, Layer, LayerState, Param,
};
use crate::tensor::{he_init, Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeConfig {
    pub channels: usize,
    pub reduction: usize,
}

impl SeConfig {
    pub fn new(channels: usize, reduction: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("SE channels must be positive".into()));
        }
        if reduction == 0 {
            return Err(Error::Config("SE reduction ratio must be ≥ 1".into()));
        }
        Ok(Self { channels, reduction })
    }

    /// Bottleneck width `max(C / r, 1)` with floored division.
    pub fn reduced(&self) -> usize {
        (self.channels / self.reduction).max(1)
    }

    /// `2·C·d + d + C` (weights plus biases).
    pub fn num_params(&self) -> usize {
        let d = self.reduced();
        2 * self.channels * d + d + self.channels
    }
}

/// Borrowed view of the excitation weights.
#[derive(Clone, Copy, Debug)]
pub struct SeParams<'a> {
    pub w1: &'a Tensor,
    pub b1: Option<&'a Tensor>,
    pub w2: &'a Tensor,
    pub b2: Option<&'a Tensor>,
}

impl SeParams<'_> {
    fn check(&self, channels: usize) -> Result<()> {
        let (d, c1) = self.w1.dims2()?;
        let (c2, d2) = self.w2.dims2()?;
        if c1 != channels || c2 != channels {
            return Err(Error::Shape(format!(
                "SE weights expect {c1}/{c2} channels but the input channel axis is {channels}"
            )));
        }
        if d2 != d {
            return Err(Error::Shape(format!("SE bottleneck mismatch: W1 has {d} rows, W2 has {d2} columns")));
        }
        Ok(())
    }
}

/// Global average pooling of every channel: (N, C, H, W) -> (N, C).
pub fn se_squeeze(u: &Tensor) -> Result<Tensor> {
    global_avg_pool(u)
}

/// Intermediate activations of the excitation MLP.
#[derive(Clone, Debug)]
struct ExciteTrace {
    hidden_pre: Tensor,
    hidden: Tensor,
    gate: Tensor,
}

fn excite_traced(z: &Tensor, p: &SeParams) -> Result<ExciteTrace> {
    let (_, c) = z.dims2()?;
    p.check(c)?;
    let hidden_pre = linear_forward(z, p.w1, p.b1)?;
    let hidden = relu_forward(&hidden_pre);
    let gate = sigmoid_forward(&linear_forward(&hidden, p.w2, p.b2)?);
    Ok(ExciteTrace { hidden_pre, hidden, gate })
}

/// Channel gates `s = σ(W2 · ReLU(W1 · z + b1) + b2)`, each in (0, 1).
pub fn se_excite(z: &Tensor, p: &SeParams) -> Result<Tensor> {
    Ok(excite_traced(z, p)?.gate)
}

/// Channel-wise rescale `x[n,c,i,j] = s[n,c] · u[n,c,i,j]`.
pub fn se_scale(u: &Tensor, s: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = u.dims4()?;
    if s.shape() != [n, c] {
        return Err(Error::Shape(format!("SE gate shape {:?} does not match (N, C) = ({n}, {c})", s.shape())));
    }
    let plane = h * w;
    let mut out = u.data().to_vec();
    for (chunk, &gate) in out.chunks_mut(plane.max(1)).zip(s.data()) {
        chunk.iter_mut().for_each(|v| *v *= gate);
    }
    Tensor::new(u.shape(), out)
}

/// Saved activations of [`se_forward`].
#[derive(Clone, Debug)]
pub struct SeContext {
    input: Tensor,
    squeezed: Tensor,
    trace: ExciteTrace,
}

pub fn se_forward(u: &Tensor, p: &SeParams) -> Result<(Tensor, SeContext)> {
    let z = se_squeeze(u)?;
    let trace = excite_traced(&z, p)?;
    let out = se_scale(u, &trace.gate)?;
    Ok((out, SeContext { input: u.clone(), squeezed: z, trace }))
}

#[derive(Clone, Debug)]
pub struct SeGrads {
    pub input: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Exact gradient of [`se_forward`]. The input gradient is the sum of the
/// direct scale path `s · g` and the squeeze path through the gates.
pub fn se_backward(ctx: &SeContext, p: &SeParams, grad_out: &Tensor) -> Result<SeGrads> {
    ctx.input.check_same_shape(grad_out)?;
    let (n, c, h, w) = grad_out.dims4()?;
    let plane = h * w;
    let u = ctx.input.data();
    let g = grad_out.data();
    let s = ctx.trace.gate.data();

    // dL/ds[n,c] = Σ_ij g · u
    let grad_gate: Vec<f32> = (0..n * c)
        .map(|k| {
            let off = k * plane;
            g[off..off + plane].iter().zip(&u[off..off + plane]).map(|(a, b)| a * b).sum()
        })
        .collect();
    let grad_gate = Tensor::new(&[n, c], grad_gate)?;
    let grad_logit = sigmoid_backward(&ctx.trace.gate, &grad_gate)?;
    let fc2 = linear_backward(&ctx.trace.hidden, p.w2, &grad_logit)?;
    let grad_hidden_pre = relu_backward(&ctx.trace.hidden_pre, &fc2.input)?;
    let fc1 = linear_backward(&ctx.squeezed, p.w1, &grad_hidden_pre)?;
    let mut grad_input = global_avg_pool_backward(ctx.input.shape(), &fc1.input)?;
    for (k, chunk) in grad_input.data_mut().chunks_mut(plane.max(1)).enumerate() {
        let off = k * plane;
        for (dst, &gv) in chunk.iter_mut().zip(&g[off..off + plane]) {
            *dst += s[k] * gv;
        }
    }
    Ok(SeGrads { input: grad_input, w1: fc1.weight, b1: fc1.bias, w2: fc2.weight, b2: fc2.bias })
}

/// SE block as a layer. Parameters are `{name}.fc1.{weight,bias}` and
/// `{name}.fc2.{weight,bias}`; weights He-initialized, biases zero.
pub struct SqueezeExcite {
    pub config: SeConfig,
    pub state: LayerState,
    ctx: Option<SeContext>,
}

impl SqueezeExcite {
    pub fn new(name: &str, config: SeConfig, rng: &mut Rng) -> Result<Self> {
        let (c, d) = (config.channels, config.reduced());
        let state = LayerState::new(vec![
            Param::new(format!("{name}.fc1.weight"), he_init(&[d, c], rng)?),
            Param::new(format!("{name}.fc1.bias"), Tensor::zeros(&[d])),
            Param::new(format!("{name}.fc2.weight"), he_init(&[c, d], rng)?),
            Param::new(format!("{name}.fc2.bias"), Tensor::zeros(&[c])),
        ]);
        Ok(Self { config, state, ctx: None })
    }

    pub fn params(&self) -> SeParams<'_> {
        let p = &self.state.params;
        SeParams { w1: &p[0].value, b1: Some(&p[1].value), w2: &p[2].value, b2: Some(&p[3].value) }
    }
}

impl Layer for SqueezeExcite {
    fn kind(&self) -> &'static str {
        "squeeze_excite"
    }

    fn forward(&mut self, input: &Tensor, _training: bool) -> Result<Tensor> {
        let (out, ctx) = se_forward(input, &self.params())?;
        self.ctx = Some(ctx);
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let ctx = self.ctx.take().ok_or_else(|| missing_ctx("squeeze_excite"))?;
        let grads = se_backward(&ctx, &self.params(), grad_output)?;
        if self.state.trainable {
            let p = &mut self.state.params;
            p[0].grad.add_assign(&grads.w1)?;
            p[1].grad.add_assign(&grads.b1)?;
            p[2].grad.add_assign(&grads.w2)?;
            p[3].grad.add_assign(&grads.b2)?;
        }
        Ok(grads.input)
    }

    fn states(&self) -> Vec<&LayerState> {
        vec![&self.state]
    }

    fn states_mut(&mut self) -> Vec<&mut LayerState> {
        vec![&mut self.state]
    }

    fn activation_pattern(&self, out: &mut Vec<u8>) {
        if let Some(ctx) = &self.ctx {
            out.extend(ctx.trace.hidden_pre.data().iter().map(|&v| u8::from(v > 0.0)));
        }
    }
}
