//! MobileNetV2 and the SE-augmented MobileNet-Lung variant.

mod checkpoint;
mod mobilenet;

pub use checkpoint::{decode_tensors, encode_tensors, load_weights, save_weights, LoadReport, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mobilenet::{
    build_mobilenet_lung, build_mobilenet_v2, build_model, make_divisible, InvertedResidual, InvertedResidualSpec,
    MOBILENET_V2_STAGES,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::{Layer, LayerState};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    MobileNetV2,
    /// MobileNetV2 with an SE block after the stem.
    MobileNetLung,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::MobileNetV2 => "mobilenet_v2",
            Arch::MobileNetLung => "mobilenet_lung",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mobilenet_v2" => Ok(Arch::MobileNetV2),
            "mobilenet_lung" => Ok(Arch::MobileNetLung),
            other => Err(Error::Config(format!("unknown arch {other:?} (expected mobilenet_v2 or mobilenet_lung)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub width_multiplier: f32,
    pub input_size: usize,
    pub se_after_stem: bool,
    pub se_reduction: usize,
    pub dropout_rate: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_classes: 3,
            width_multiplier: 1.0,
            input_size: 224,
            se_after_stem: false,
            se_reduction: 16,
            dropout_rate: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn for_arch(arch: Arch) -> Self {
        Self { se_after_stem: arch == Arch::MobileNetLung, ..Self::default() }
    }

    /// Desk-scale preset: width 0.25, 64×64 input, 3 classes.
    pub fn mini(arch: Arch) -> Self {
        Self { width_multiplier: 0.25, input_size: 64, ..Self::for_arch(arch) }
    }

    pub fn arch(&self) -> Arch {
        if self.se_after_stem {
            Arch::MobileNetLung
        } else {
            Arch::MobileNetV2
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be ≥ 2, got {}", self.num_classes)));
        }
        if !(self.width_multiplier > 0.0 && self.width_multiplier.is_finite()) {
            return Err(Error::Config(format!("width_multiplier must be > 0, got {}", self.width_multiplier)));
        }
        if self.input_size == 0 {
            return Err(Error::Config("input_size must be positive".into()));
        }
        if self.se_reduction == 0 {
            return Err(Error::Config("se_reduction must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate must be in [0,1), got {}", self.dropout_rate)));
        }
        Ok(())
    }
}

/// Which parameters an optimizer may update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainablePolicy {
    All,
    None,
    HeadOnly,
}

impl FromStr for TrainablePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::All),
            "none" => Ok(Self::None),
            "head_only" => Ok(Self::HeadOnly),
            other => Err(Error::Config(format!("unknown trainable policy {other:?} (expected all, none or head_only)"))),
        }
    }
}

impl fmt::Display for TrainablePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::All => "all",
            Self::None => "none",
            Self::HeadOnly => "head_only",
        })
    }
}

/// One top-level entry of a model.
pub struct Node {
    pub name: String,
    /// Coarse grouping used for per-stage parameter breakdowns.
    pub stage: String,
    pub layer: Box<dyn Layer>,
}

/// Stage label of the classifier nodes.
pub const HEAD_STAGE: &str = "classifier";

/// Ordered layers of a built network.
pub struct ModelGraph {
    pub config: ModelConfig,
    pub nodes: Vec<Node>,
}

impl ModelGraph {
    pub fn arch(&self) -> Arch {
        self.config.arch()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let (_, c, h, w) = batch.dims4()?;
        let s = self.config.input_size;
        if c != 3 || h != s || w != s {
            return Err(Error::Shape(format!(
                "model expects batches of shape (N, 3, {s}, {s}), got {:?}",
                batch.shape()
            )));
        }
        Ok(())
    }

    /// Logits of shape (N, num_classes).
    pub fn forward(&mut self, batch: &Tensor, training: bool) -> Result<Tensor> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for node in &mut self.nodes {
            x = node.layer.forward(&x, training)?;
        }
        Ok(x)
    }

    /// Accumulates gradients of every trainable parameter. Layers before the
    /// earliest trainable one are skipped.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<()> {
        let Some(first) = self.nodes.iter().position(|n| n.layer.states().iter().any(|s| s.trainable)) else {
            return Ok(());
        };
        let mut g = grad_logits.clone();
        for node in self.nodes[first..].iter_mut().rev() {
            g = node.layer.backward(&g)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.layer.zero_grad();
        }
    }

    pub fn states(&self) -> Vec<&LayerState> {
        self.nodes.iter().flat_map(|n| n.layer.states()).collect()
    }

    pub fn states_mut(&mut self) -> Vec<&mut LayerState> {
        self.nodes.iter_mut().flat_map(|n| n.layer.states_mut()).collect()
    }

    pub fn set_trainable(&mut self, policy: TrainablePolicy) {
        for node in &mut self.nodes {
            let on = match policy {
                TrainablePolicy::All => true,
                TrainablePolicy::None => false,
                TrainablePolicy::HeadOnly => node.stage == HEAD_STAGE,
            };
            for s in node.layer.states_mut() {
                s.trainable = on;
            }
        }
    }

    /// Element count of all parameters (running statistics excluded).
    pub fn count_params(&self) -> usize {
        self.nodes.iter().map(|n| n.layer.num_params()).sum()
    }

    /// Parameter counts per stage, in network order.
    pub fn param_breakdown(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for node in &self.nodes {
            let n = node.layer.num_params();
            match out.last_mut() {
                Some((stage, total)) if *stage == node.stage => *total += n,
                _ => out.push((node.stage.clone(), n)),
            }
        }
        out
    }

    /// Every parameter and running statistic by name, in network order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for s in self.states() {
            out.extend(s.params.iter().map(|p| (p.name.clone(), &p.value)));
            out.extend(s.running_stats.iter().map(|b| (b.name.clone(), &b.value)));
        }
        out
    }

    /// Mutable access to a named parameter or running statistic.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        for s in self.states_mut() {
            for p in &mut s.params {
                if p.name == name {
                    return Some(&mut p.value);
                }
            }
            for b in &mut s.running_stats {
                if b.name == name {
                    return Some(&mut b.value);
                }
            }
        }
        None
    }

    /// All parameter values concatenated, for bit-level comparisons.
    pub fn flat_params(&self) -> Vec<f32> {
        self.states().iter().flat_map(|s| s.params.iter().flat_map(|p| p.value.data().iter().copied())).collect()
    }

    /// `(name, kind)` of every top-level node.
    pub fn listing(&self) -> Vec<(String, &'static str)> {
        self.nodes.iter().map(|n| (n.name.clone(), n.layer.kind())).collect()
    }
}

impl Layer for ModelGraph {
    fn kind(&self) -> &'static str {
        "model"
    }

    fn forward(&mut self, input: &Tensor, training: bool) -> Result<Tensor> {
        ModelGraph::forward(self, input, training)
    }

    /// Full backward returning the gradient w.r.t. the input batch.
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = grad_output.clone();
        for node in self.nodes.iter_mut().rev() {
            g = node.layer.backward(&g)?;
        }
        Ok(g)
    }

    fn states(&self) -> Vec<&LayerState> {
        ModelGraph::states(self)
    }

    fn states_mut(&mut self) -> Vec<&mut LayerState> {
        ModelGraph::states_mut(self)
    }

    fn activation_pattern(&self, out: &mut Vec<u8>) {
        for node in &self.nodes {
            node.layer.activation_pattern(out);
        }
    }
}
