//! 2-D convolution with groups (depthwise when `groups == C_in == C_out`).

use rayon::prelude::*;

use super::{missing_ctx, Layer, LayerState, Param};
use crate::error::{Error, Result};
use crate::tensor::{he_init, Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Self { stride: 1, padding: 0, groups: 1 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
    groups: usize,
}

impl Geometry {
    fn resolve(input: &[usize], weight: &[usize], opts: Conv2dOptions) -> Result<Self> {
        let [_, cin, h, w] = *input else {
            return Err(Error::Shape(format!("conv2d input must be rank 4 (N,C,H,W), got {input:?}")));
        };
        let [cout, cin_g, kh, kw] = *weight else {
            return Err(Error::Shape(format!("conv2d weight must be rank 4, got {weight:?}")));
        };
        let Conv2dOptions { stride, padding, groups } = opts;
        if stride == 0 || groups == 0 {
            return Err(Error::Config("conv2d stride and groups must be positive".into()));
        }
        if cin % groups != 0 {
            return Err(Error::Shape(format!("input channel axis C={cin} not divisible by groups={groups}")));
        }
        if cout % groups != 0 {
            return Err(Error::Shape(format!("weight output-channel axis {cout} not divisible by groups={groups}")));
        }
        if cin / groups != cin_g {
            return Err(Error::Shape(format!(
                "weight input-channel axis is {cin_g}, expected C_in/groups = {}",
                cin / groups
            )));
        }
        if h + 2 * padding < kh {
            return Err(Error::Shape(format!("height axis {h} (+2·{padding} padding) smaller than kernel {kh}")));
        }
        if w + 2 * padding < kw {
            return Err(Error::Shape(format!("width axis {w} (+2·{padding} padding) smaller than kernel {kw}")));
        }
        let oh = (h + 2 * padding - kh) / stride + 1;
        let ow = (w + 2 * padding - kw) / stride + 1;
        Ok(Self { cin, h, w, cout, kh, kw, oh, ow, stride, pad: padding, groups })
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0 && self.groups == 1
    }

    fn in_size(&self) -> usize {
        self.cin * self.h * self.w
    }

    fn out_size(&self) -> usize {
        self.cout * self.oh * self.ow
    }
}

/// Output positions `o` in `lo..hi` for which `o*stride + k - pad` lies in `[0, len)`.
fn valid_range(k: usize, pad: usize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    if len + pad < k + 1 {
        return (0, 0);
    }
    let hi = ((len - 1 + pad - k) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// Each output is accumulated in f64 and rounded once, so the result does not
/// depend on the order of the reduction and carries at most half an ulp of error.
fn forward_sample(g: &Geometry, x: &[f32], weight: &[f32], bias: Option<&[f32]>, out: &mut [f32]) {
    let plane = g.oh * g.ow;
    let mut acc = vec![0.0f64; plane];
    let cin_g = g.cin / g.groups;
    let cout_g = g.cout / g.groups;
    for (oc, orow_all) in out.chunks_mut(plane).enumerate() {
        acc.fill(bias.map_or(0.0, |b| b[oc] as f64));
        if g.is_pointwise() {
            for ic in 0..g.cin {
                let wv = weight[oc * g.cin + ic] as f64;
                for (a, &xv) in acc.iter_mut().zip(&x[ic * plane..(ic + 1) * plane]) {
                    *a += wv * xv as f64;
                }
            }
        } else {
            let group = oc / cout_g;
            for icl in 0..cin_g {
                let ic = group * cin_g + icl;
                let xplane = &x[ic * g.h * g.w..(ic + 1) * g.h * g.w];
                for ki in 0..g.kh {
                    let (oy0, oy1) = valid_range(ki, g.pad, g.stride, g.h, g.oh);
                    for kj in 0..g.kw {
                        let wv = weight[((oc * cin_g + icl) * g.kh + ki) * g.kw + kj] as f64;
                        let (ox0, ox1) = valid_range(kj, g.pad, g.stride, g.w, g.ow);
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ki - g.pad;
                            let arow = &mut acc[oy * g.ow..(oy + 1) * g.ow];
                            let xrow = &xplane[iy * g.w..(iy + 1) * g.w];
                            if g.stride == 1 {
                                let ix0 = ox0 + kj - g.pad;
                                for (a, &xv) in arow[ox0..ox1].iter_mut().zip(&xrow[ix0..]) {
                                    *a += wv * xv as f64;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    arow[ox] += wv * xrow[ox * g.stride + kj - g.pad] as f64;
                                }
                            }
                        }
                    }
                }
            }
        }
        for (o, &a) in orow_all.iter_mut().zip(&acc) {
            *o = a as f32;
        }
    }
}

fn backward_input_sample(g: &Geometry, weight: &[f32], gout: &[f32], gin: &mut [f32]) {
    gin.fill(0.0);
    let plane = g.oh * g.ow;
    if g.is_pointwise() {
        for ic in 0..g.cin {
            let row = &mut gin[ic * plane..(ic + 1) * plane];
            for oc in 0..g.cout {
                let wv = weight[oc * g.cin + ic];
                for (o, &gv) in row.iter_mut().zip(&gout[oc * plane..(oc + 1) * plane]) {
                    *o += wv * gv;
                }
            }
        }
        return;
    }
    let cin_g = g.cin / g.groups;
    let cout_g = g.cout / g.groups;
    for oc in 0..g.cout {
        let group = oc / cout_g;
        let grow = &gout[oc * plane..(oc + 1) * plane];
        for icl in 0..cin_g {
            let ic = group * cin_g + icl;
            let gplane = &mut gin[ic * g.h * g.w..(ic + 1) * g.h * g.w];
            for ki in 0..g.kh {
                let (oy0, oy1) = valid_range(ki, g.pad, g.stride, g.h, g.oh);
                for kj in 0..g.kw {
                    let wv = weight[((oc * cin_g + icl) * g.kh + ki) * g.kw + kj];
                    let (ox0, ox1) = valid_range(kj, g.pad, g.stride, g.w, g.ow);
                    for oy in oy0..oy1 {
                        let iy = oy * g.stride + ki - g.pad;
                        let src = &grow[oy * g.ow..(oy + 1) * g.ow];
                        let dst = &mut gplane[iy * g.w..(iy + 1) * g.w];
                        for ox in ox0..ox1 {
                            dst[ox * g.stride + kj - g.pad] += wv * src[ox];
                        }
                    }
                }
            }
        }
    }
}

fn backward_weight_sample(g: &Geometry, x: &[f32], gout: &[f32], gw: &mut [f32]) {
    let plane = g.oh * g.ow;
    if g.is_pointwise() {
        for oc in 0..g.cout {
            let grow = &gout[oc * plane..(oc + 1) * plane];
            for ic in 0..g.cin {
                let xs = &x[ic * plane..(ic + 1) * plane];
                gw[oc * g.cin + ic] += grow.iter().zip(xs).map(|(a, b)| a * b).sum::<f32>();
            }
        }
        return;
    }
    let cin_g = g.cin / g.groups;
    let cout_g = g.cout / g.groups;
    for oc in 0..g.cout {
        let group = oc / cout_g;
        let grow = &gout[oc * plane..(oc + 1) * plane];
        for icl in 0..cin_g {
            let ic = group * cin_g + icl;
            let xplane = &x[ic * g.h * g.w..(ic + 1) * g.h * g.w];
            for ki in 0..g.kh {
                let (oy0, oy1) = valid_range(ki, g.pad, g.stride, g.h, g.oh);
                for kj in 0..g.kw {
                    let (ox0, ox1) = valid_range(kj, g.pad, g.stride, g.w, g.ow);
                    let mut acc = 0.0f32;
                    for oy in oy0..oy1 {
                        let iy = oy * g.stride + ki - g.pad;
                        let src = &grow[oy * g.ow..(oy + 1) * g.ow];
                        let xrow = &xplane[iy * g.w..(iy + 1) * g.w];
                        for ox in ox0..ox1 {
                            acc += src[ox] * xrow[ox * g.stride + kj - g.pad];
                        }
                    }
                    gw[((oc * cin_g + icl) * g.kh + ki) * g.kw + kj] += acc;
                }
            }
        }
    }
}

/// Batched convolution. Output spatial size is `floor((H + 2p - k)/s) + 1`.
pub fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    opts: Conv2dOptions,
) -> Result<Tensor> {
    let g = Geometry::resolve(input.shape(), weight.shape(), opts)?;
    if let Some(b) = bias {
        if b.shape() != [g.cout] {
            return Err(Error::Shape(format!("bias must have shape [{}], got {:?}", g.cout, b.shape())));
        }
    }
    let n = input.shape()[0];
    let mut out = vec![0.0f32; n * g.out_size()];
    let w = weight.data();
    let b = bias.map(|b| b.data());
    out.par_chunks_mut(g.out_size().max(1))
        .zip(input.data().par_chunks(g.in_size().max(1)))
        .for_each(|(o, x)| forward_sample(&g, x, w, b, o));
    Tensor::new(&[n, g.cout, g.oh, g.ow], out)
}

/// Values saved by a convolution forward pass.
#[derive(Clone, Debug)]
pub struct ConvContext {
    pub input: Tensor,
    pub weight: Tensor,
    pub has_bias: bool,
    pub opts: Conv2dOptions,
}

#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

/// Exact gradients of [`conv2d_forward`]. `need_weight` skips the weight and
/// bias reductions when false (they are returned as zeros).
pub fn conv2d_backward(ctx: &ConvContext, grad_out: &Tensor, need_weight: bool) -> Result<ConvGrads> {
    let g = Geometry::resolve(ctx.input.shape(), ctx.weight.shape(), ctx.opts)?;
    let n = ctx.input.shape()[0];
    let expected = [n, g.cout, g.oh, g.ow];
    if grad_out.shape() != expected {
        return Err(Error::Shape(format!(
            "conv2d grad_output shape {:?}, expected {expected:?}",
            grad_out.shape()
        )));
    }
    let w = ctx.weight.data();
    let mut gin = vec![0.0f32; n * g.in_size()];
    gin.par_chunks_mut(g.in_size().max(1))
        .zip(grad_out.data().par_chunks(g.out_size().max(1)))
        .for_each(|(gi, go)| backward_input_sample(&g, w, go, gi));

    let mut gw = vec![0.0f32; w.len()];
    let mut gb = ctx.has_bias.then(|| vec![0.0f32; g.cout]);
    if need_weight {
        // Per-sample partials reduced in sample order keep results independent of thread count.
        let partials: Vec<Vec<f32>> = ctx
            .input
            .data()
            .par_chunks(g.in_size().max(1))
            .zip(grad_out.data().par_chunks(g.out_size().max(1)))
            .map(|(x, go)| {
                let mut part = vec![0.0f32; w.len()];
                backward_weight_sample(&g, x, go, &mut part);
                part
            })
            .collect();
        for part in &partials {
            for (a, b) in gw.iter_mut().zip(part) {
                *a += b;
            }
        }
        if let Some(gb) = gb.as_mut() {
            let plane = g.oh * g.ow;
            for sample in grad_out.data().chunks(g.out_size().max(1)) {
                for (oc, b) in gb.iter_mut().enumerate() {
                    *b += sample[oc * plane..(oc + 1) * plane].iter().sum::<f32>();
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(ctx.input.shape(), gin)?,
        weight: Tensor::new(ctx.weight.shape(), gw)?,
        bias: gb.map(|b| Tensor::new(&[g.cout], b)).transpose()?,
    })
}

/// Convolution layer owning its weight (and optional bias).
pub struct Conv2d {
    pub state: LayerState,
    pub opts: Conv2dOptions,
    ctx: Option<ConvContext>,
}

impl Conv2d {
    /// He-initialized convolution; `name` prefixes the parameter names.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        opts: Conv2dOptions,
        bias: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if opts.groups == 0 || !in_channels.is_multiple_of(opts.groups) || !out_channels.is_multiple_of(opts.groups) {
            return Err(Error::Config(format!(
                "conv {name}: channels {in_channels}->{out_channels} incompatible with groups={}",
                opts.groups
            )));
        }
        let weight = he_init(&[out_channels, in_channels / opts.groups, kernel, kernel], rng)?;
        let mut params = vec![Param::new(format!("{name}.weight"), weight)];
        if bias {
            params.push(Param::new(format!("{name}.bias"), Tensor::zeros(&[out_channels])));
        }
        Ok(Self { state: LayerState::new(params), opts, ctx: None })
    }

    pub fn weight(&self) -> &Tensor {
        &self.state.params[0].value
    }

    pub fn bias(&self) -> Option<&Tensor> {
        self.state.params.get(1).map(|p| &p.value)
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> &'static str {
        if self.opts.groups > 1 && self.opts.groups == self.weight().shape()[0] {
            "conv2d_depthwise"
        } else {
            "conv2d"
        }
    }

    fn forward(&mut self, input: &Tensor, _training: bool) -> Result<Tensor> {
        let out = conv2d_forward(input, self.weight(), self.bias(), self.opts)?;
        self.ctx = Some(ConvContext {
            input: input.clone(),
            weight: self.weight().clone(),
            has_bias: self.bias().is_some(),
            opts: self.opts,
        });
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let ctx = self.ctx.take().ok_or_else(|| missing_ctx("conv2d"))?;
        let trainable = self.state.trainable;
        let grads = conv2d_backward(&ctx, grad_output, trainable)?;
        if trainable {
            self.state.params[0].grad.add_assign(&grads.weight)?;
            if let (Some(gb), Some(p)) = (grads.bias, self.state.params.get_mut(1)) {
                p.grad.add_assign(&gb)?;
            }
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

    /// Direct nested-loop convolution, kept independent of the optimized kernels.
    fn conv_oracle(x: &Tensor, w: &Tensor, b: Option<&Tensor>, s: usize, p: usize, groups: usize) -> Tensor {
        let (n, cin, h, wd) = x.dims4().unwrap();
        let (cout, cin_g, kh, kw) = w.dims4().unwrap();
        let oh = (h + 2 * p - kh) / s + 1;
        let ow = (wd + 2 * p - kw) / s + 1;
        let cout_g = cout / groups;
        let mut out = Tensor::zeros(&[n, cout, oh, ow]);
        for ni in 0..n {
            for oc in 0..cout {
                let grp = oc / cout_g;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b.map_or(0.0f64, |b| b.data()[oc] as f64);
                        for icl in 0..cin_g {
                            let ic = grp * cin_g + icl;
                            for ki in 0..kh {
                                for kj in 0..kw {
                                    let iy = (oy * s + ki) as isize - p as isize;
                                    let ix = (ox * s + kj) as isize - p as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    let xv = x.data()[((ni * cin + ic) * h + iy as usize) * wd + ix as usize];
                                    let wv = w.data()[((oc * cin_g + icl) * kh + ki) * kw + kj];
                                    acc += xv as f64 * wv as f64;
                                }
                            }
                        }
                        out.data_mut()[((ni * cout + oc) * oh + oy) * ow + ox] = acc as f32;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn all_ones_kernel_sums() {
        let x = Tensor::ones(&[1, 1, 3, 3]);
        let w = Tensor::ones(&[1, 1, 2, 2]);
        let y = conv2d_forward(&x, &w, None, Conv2dOptions::default()).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn identity_kernel() {
        let mut rng = Rng::new(3);
        let x = Tensor::uniform(&[2, 1, 5, 4], -1.0, 1.0, &mut rng);
        let w = Tensor::ones(&[1, 1, 1, 1]);
        let y = conv2d_forward(&x, &w, None, Conv2dOptions::default()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = Rng::new(42);
        let x = Tensor::uniform(&[2, 3, 8, 8], -1.0, 1.0, &mut rng);
        let w = Tensor::uniform(&[4, 3, 3, 3], -1.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[4], -1.0, 1.0, &mut rng);
        for (s, p) in [(1, 0), (1, 1), (2, 1), (2, 0), (3, 2)] {
            let opts = Conv2dOptions { stride: s, padding: p, groups: 1 };
            let y = conv2d_forward(&x, &w, Some(&b), opts).unwrap();
            let o = conv_oracle(&x, &w, Some(&b), s, p, 1);
            assert_eq!(y.shape(), o.shape());
            assert!(y.max_abs_diff(&o).unwrap() < 1e-5, "stride {s} pad {p}");
        }
    }

    #[test]
    fn grouped_and_pointwise_match_oracle() {
        let mut rng = Rng::new(8);
        let x = Tensor::uniform(&[2, 4, 7, 6], -1.0, 1.0, &mut rng);
        let w = Tensor::uniform(&[6, 4, 1, 1], -1.0, 1.0, &mut rng);
        let y = conv2d_forward(&x, &w, None, Conv2dOptions::default()).unwrap();
        assert!(y.max_abs_diff(&conv_oracle(&x, &w, None, 1, 0, 1)).unwrap() < 1e-5);

        let w = Tensor::uniform(&[4, 2, 3, 3], -1.0, 1.0, &mut rng);
        let opts = Conv2dOptions { stride: 2, padding: 1, groups: 2 };
        let y = conv2d_forward(&x, &w, None, opts).unwrap();
        assert!(y.max_abs_diff(&conv_oracle(&x, &w, None, 2, 1, 2)).unwrap() < 1e-5);
    }

    #[test]
    fn depthwise_equals_per_channel_convolution() {
        let mut rng = Rng::new(9);
        let x = Tensor::uniform(&[2, 4, 6, 6], -1.0, 1.0, &mut rng);
        let w = Tensor::uniform(&[4, 1, 3, 3], -1.0, 1.0, &mut rng);
        let opts = Conv2dOptions { stride: 1, padding: 1, groups: 4 };
        let y = conv2d_forward(&x, &w, None, opts).unwrap();
        for c in 0..4 {
            let mut xc = Vec::new();
            for n in 0..2 {
                xc.extend_from_slice(&x.data()[(n * 4 + c) * 36..(n * 4 + c + 1) * 36]);
            }
            let xc = Tensor::new(&[2, 1, 6, 6], xc).unwrap();
            let wc = Tensor::new(&[1, 1, 3, 3], w.data()[c * 9..(c + 1) * 9].to_vec()).unwrap();
            let single = Conv2dOptions { stride: 1, padding: 1, groups: 1 };
            let yc = conv2d_forward(&xc, &wc, None, single).unwrap();
            for n in 0..2 {
                let got = &y.data()[(n * 4 + c) * 36..(n * 4 + c + 1) * 36];
                let want = &yc.data()[n * 36..(n + 1) * 36];
                for (a, b) in got.iter().zip(want) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn shape_errors_name_the_axis() {
        let x = Tensor::zeros(&[1, 3, 4, 4]);
        let w = Tensor::zeros(&[2, 2, 3, 3]);
        let err = conv2d_forward(&x, &w, None, Conv2dOptions::default()).unwrap_err();
        assert!(err.to_string().contains("input-channel axis"), "{err}");
        let w = Tensor::zeros(&[2, 3, 3, 3]);
        let err = conv2d_forward(&x, &w, None, Conv2dOptions { stride: 1, padding: 0, groups: 2 }).unwrap_err();
        assert!(err.to_string().contains("groups"), "{err}");
        let err = conv2d_forward(&Tensor::zeros(&[3, 4, 4]), &w, None, Conv2dOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = Rng::new(1);
        let mut conv = Conv2d::new("c", 3, 4, 3, Conv2dOptions { stride: 2, padding: 1, groups: 1 }, true, &mut rng).unwrap();
        let x = Tensor::uniform(&[2, 3, 6, 6], -1.0, 1.0, &mut rng);
        let y = conv.forward(&x, true).unwrap();
        let gx = conv.backward(&Tensor::zeros_like(&y)).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(conv.state.params.iter().all(|p| p.grad.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn pointwise_weight_grad_is_contraction() {
        let mut rng = Rng::new(2);
        let x = Tensor::uniform(&[3, 5, 4, 4], -1.0, 1.0, &mut rng);
        let w = Tensor::uniform(&[2, 5, 1, 1], -1.0, 1.0, &mut rng);
        let gout = Tensor::uniform(&[3, 2, 4, 4], -1.0, 1.0, &mut rng);
        let ctx = ConvContext { input: x.clone(), weight: w.clone(), has_bias: false, opts: Conv2dOptions::default() };
        let grads = conv2d_backward(&ctx, &gout, true).unwrap();
        // gW[o][i] = sum_{n,p} gout[n,o,p] * x[n,i,p]
        for o in 0..2 {
            for i in 0..5 {
                let mut acc = 0.0f64;
                for n in 0..3 {
                    for p in 0..16 {
                        acc += gout.data()[(n * 2 + o) * 16 + p] as f64 * x.data()[(n * 5 + i) * 16 + p] as f64;
                    }
                }
                assert!((grads.weight.data()[o * 5 + i] as f64 - acc).abs() < 1e-4);
            }
        }
        // gX[n,i,p] = sum_o w[o][i] * gout[n,o,p]
        for n in 0..3 {
            for i in 0..5 {
                for p in 0..16 {
                    let acc: f32 = (0..2).map(|o| w.data()[o * 5 + i] * gout.data()[(n * 2 + o) * 16 + p]).sum();
                    assert!((grads.input.data()[(n * 5 + i) * 16 + p] - acc).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn backward_without_forward_is_usage_error() {
        let mut conv = Conv2d::new("c", 1, 1, 1, Conv2dOptions::default(), false, &mut Rng::new(0)).unwrap();
        assert!(matches!(conv.backward(&Tensor::zeros(&[1, 1, 2, 2])), Err(Error::Usage(_))));
    }

    #[test]
    fn valid_range_bounds() {
        // k=0, pad=1, stride=1, len=4 -> outputs 1..4 read inputs 0..3
        assert_eq!(valid_range(0, 1, 1, 4, 4), (1, 4));
        assert_eq!(valid_range(2, 1, 1, 4, 4), (0, 3));
        assert_eq!(valid_range(0, 1, 2, 4, 2), (1, 2));
    }
}
