use super::{ModelConfig, ModelGraph, Node, HEAD_STAGE};
use crate::attention::{SeConfig, SqueezeExcite};
use crate::error::{Error, Result};
use crate::layers::{
    BatchNorm2d, BnConfig, Conv2d, Conv2dOptions, Dropout, GlobalAvgPool, Layer, LayerState, Linear, Relu6,
    Sequential,
};
use crate::tensor::{Rng, Tensor};

/// One row of the stage table: expansion `t`, output channels `c`,
/// repeats `n`, stride of the first block `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvertedResidualSpec {
    pub expansion: usize,
    pub out_channels: usize,
    pub repeats: usize,
    pub first_stride: usize,
}

const fn spec(t: usize, c: usize, n: usize, s: usize) -> InvertedResidualSpec {
    InvertedResidualSpec { expansion: t, out_channels: c, repeats: n, first_stride: s }
}

pub const MOBILENET_V2_STAGES: [InvertedResidualSpec; 7] = [
    spec(1, 16, 1, 1),
    spec(6, 24, 2, 2),
    spec(6, 32, 3, 2),
    spec(6, 64, 4, 2),
    spec(6, 96, 3, 1),
    spec(6, 160, 3, 2),
    spec(6, 320, 1, 1),
];

const STEM_CHANNELS: f32 = 32.0;
const LAST_CHANNELS: f32 = 1280.0;

/// Round `v` to the nearest multiple of 8 (minimum 8), never going more than
/// 10% below `v`.
pub fn make_divisible(v: f32) -> usize {
    const DIVISOR: usize = 8;
    let rounded = ((v + DIVISOR as f32 / 2.0) as usize / DIVISOR * DIVISOR).max(DIVISOR);
    if (rounded as f32) < 0.9 * v {
        rounded + DIVISOR
    } else {
        rounded
    }
}

/// Conv (no bias) + BatchNorm, optionally followed by ReLU6. Sub-layers are
/// named `{name}.0` and `{name}.1`.
#[allow(clippy::too_many_arguments)]
fn conv_bn(
    name: &str,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    groups: usize,
    activation: bool,
    rng: &mut Rng,
) -> Result<Sequential> {
    let opts = Conv2dOptions { stride, padding: (kernel - 1) / 2, groups };
    let mut seq = Sequential::default();
    seq.push(Conv2d::new(&format!("{name}.0"), in_ch, out_ch, kernel, opts, false, rng)?);
    seq.push(BatchNorm2d::new(&format!("{name}.1"), out_ch, BnConfig::default()));
    if activation {
        seq.push(Relu6::default());
    }
    Ok(seq)
}

/// Expand (1×1) → depthwise 3×3 → linear projection (1×1), with a skip
/// connection when the stride is 1 and the channel count is unchanged.
pub struct InvertedResidual {
    pub body: Sequential,
    pub use_residual: bool,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
}

impl InvertedResidual {
    pub fn new(name: &str, in_ch: usize, out_ch: usize, stride: usize, expansion: usize, rng: &mut Rng) -> Result<Self> {
        if !(stride == 1 || stride == 2) {
            return Err(Error::Config(format!("inverted residual stride must be 1 or 2, got {stride}")));
        }
        let hidden = in_ch * expansion;
        let mut body = Sequential::default();
        let mut idx = 0;
        if expansion != 1 {
            body.push(conv_bn(&format!("{name}.conv.{idx}"), in_ch, hidden, 1, 1, 1, true, rng)?);
            idx += 1;
        }
        body.push(conv_bn(&format!("{name}.conv.{idx}"), hidden, hidden, 3, stride, hidden, true, rng)?);
        idx += 1;
        let project = Conv2d::new(&format!("{name}.conv.{idx}"), hidden, out_ch, 1, Conv2dOptions::default(), false, rng)?;
        body.push(project);
        body.push(BatchNorm2d::new(&format!("{name}.conv.{}", idx + 1), out_ch, BnConfig::default()));
        Ok(Self { body, use_residual: stride == 1 && in_ch == out_ch, in_channels: in_ch, out_channels: out_ch, stride })
    }
}

impl Layer for InvertedResidual {
    fn kind(&self) -> &'static str {
        "inverted_residual"
    }

    fn forward(&mut self, input: &Tensor, training: bool) -> Result<Tensor> {
        let mut out = self.body.forward(input, training)?;
        if self.use_residual {
            out.add_assign(input)?;
        }
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = self.body.backward(grad_output)?;
        if self.use_residual {
            g.add_assign(grad_output)?;
        }
        Ok(g)
    }

    fn states(&self) -> Vec<&LayerState> {
        self.body.states()
    }

    fn states_mut(&mut self) -> Vec<&mut LayerState> {
        self.body.states_mut()
    }

    fn activation_pattern(&self, out: &mut Vec<u8>) {
        self.body.activation_pattern(out);
    }
}

fn node(name: impl Into<String>, stage: impl Into<String>, layer: impl Layer + 'static) -> Node {
    Node { name: name.into(), stage: stage.into(), layer: Box::new(layer) }
}

fn build(config: &ModelConfig, rng: &mut Rng) -> Result<ModelGraph> {
    config.validate()?;
    let w = config.width_multiplier;
    let stem = make_divisible(STEM_CHANNELS * w);
    let mut nodes = vec![node("features.0", "stem", conv_bn("features.0", 3, stem, 3, 2, 1, true, rng)?)];
    if config.se_after_stem {
        let se = SqueezeExcite::new("se", SeConfig::new(stem, config.se_reduction)?, rng)?;
        nodes.push(node("se", "attention", se));
    }
    let mut in_ch = stem;
    let mut idx = 1;
    for (si, s) in MOBILENET_V2_STAGES.iter().enumerate() {
        let out_ch = make_divisible(s.out_channels as f32 * w);
        for i in 0..s.repeats {
            let stride = if i == 0 { s.first_stride } else { 1 };
            let name = format!("features.{idx}");
            let block = InvertedResidual::new(&name, in_ch, out_ch, stride, s.expansion, rng)?;
            nodes.push(node(name, format!("stage{}", si + 1), block));
            in_ch = out_ch;
            idx += 1;
        }
    }
    let last = make_divisible(LAST_CHANNELS * w.max(1.0));
    let name = format!("features.{idx}");
    nodes.push(node(name.clone(), "last_conv", conv_bn(&name, in_ch, last, 1, 1, 1, true, rng)?));
    nodes.push(node("pool", "pool", GlobalAvgPool::default()));
    let dropout_rng = Rng::new(rng.next_u64());
    nodes.push(node("classifier.0", HEAD_STAGE, Dropout::new(config.dropout_rate, dropout_rng)?));
    nodes.push(node("classifier.1", HEAD_STAGE, Linear::new("classifier.1", last, config.num_classes, rng)?));
    Ok(ModelGraph { config: config.clone(), nodes })
}

/// Plain MobileNetV2 backbone with a `num_classes` head.
pub fn build_mobilenet_v2(config: &ModelConfig, rng: &mut Rng) -> Result<ModelGraph> {
    if config.se_after_stem {
        return Err(Error::Config("build_mobilenet_v2 requires se_after_stem = false".into()));
    }
    build(config, rng)
}

/// MobileNetV2 with one SE block after the stem conv-BN-ReLU6 unit.
pub fn build_mobilenet_lung(config: &ModelConfig, rng: &mut Rng) -> Result<ModelGraph> {
    if !config.se_after_stem {
        return Err(Error::Config("build_mobilenet_lung requires se_after_stem = true".into()));
    }
    build(config, rng)
}

/// Builds whichever architecture `config.se_after_stem` selects.
pub fn build_model(config: &ModelConfig, rng: &mut Rng) -> Result<ModelGraph> {
    build(config, rng)
}
